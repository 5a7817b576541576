#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <numbers>
#include <numeric>
#include <random>

#include "ipv/errors.hpp"
#include "ipv/glmm.hpp"

using namespace ipv;

namespace {

struct Simulated {
  Matrix z;
  std::vector<int> y;
  std::vector<int> physician_of;
  std::vector<double> u;
};

Simulated simulate(int n, int J, double b0, const std::vector<double>& beta, double sigma_u, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> norm;
  std::uniform_real_distribution<double> unif;
  const auto p = static_cast<int>(beta.size());
  Simulated s{Matrix(n, p), std::vector<int>(static_cast<std::size_t>(n)),
              std::vector<int>(static_cast<std::size_t>(n)), std::vector<double>(static_cast<std::size_t>(J))};
  for (double& v : s.u) v = sigma_u * norm(gen);
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    s.physician_of[k] = i % J;
    double eta = b0 + s.u[static_cast<std::size_t>(i % J)];
    for (int c = 0; c < p; ++c) {
      s.z(i, c) = norm(gen);
      eta += beta[static_cast<std::size_t>(c)] * s.z(i, c);
    }
    s.y[k] = unif(gen) < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0;
  }
  return s;
}

GlmmFit fixed_fit(double b0, std::vector<double> beta, std::vector<double> u) {
  GlmmFit f;
  f.beta0 = b0;
  f.beta = std::move(beta);
  f.u = std::move(u);
  return f;
}

}  // namespace

TEST_SUITE("glmm") {
  TEST_CASE("Gauss-Hermite rule integrates low-order moments") {
    std::vector<double> x, w;
    gauss_hermite(20, x, w);
    REQUIRE(x.size() == 20);
    double m0 = 0.0, m2 = 0.0, m4 = 0.0, m1 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      m0 += w[k];
      m1 += w[k] * x[k];
      m2 += w[k] * x[k] * x[k];
      m4 += w[k] * std::pow(x[k], 4);
    }
    const double sp = std::sqrt(std::numbers::pi);
    CHECK(m0 == doctest::Approx(sp).epsilon(1e-12));
    CHECK(m1 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m2 == doctest::Approx(sp / 2.0).epsilon(1e-12));
    CHECK(m4 == doctest::Approx(3.0 * sp / 4.0).epsilon(1e-12));
  }

  TEST_CASE("variational fit recovers simulated effects") {
    const auto s = simulate(6000, 40, -0.5, {1.0, -0.7}, 0.8, 11);
    const auto fit = fit_vb(s.z, s.y, s.physician_of, 40);
    CHECK(fit.converged);
    CHECK(std::abs(fit.beta0 - -0.5) < 0.3);
    CHECK(std::abs(fit.beta[0] - 1.0) < 0.15);
    CHECK(std::abs(fit.beta[1] - -0.7) < 0.15);
    CHECK(std::abs(fit.sigma_u - 0.8) < 0.3);
    // Random effects track the simulated ones.
    double num = 0.0, du = 0.0, dv = 0.0;
    for (int j = 0; j < 40; ++j) {
      const auto k = static_cast<std::size_t>(j);
      num += fit.u[k] * s.u[k];
      du += fit.u[k] * fit.u[k];
      dv += s.u[k] * s.u[k];
    }
    CHECK(num / std::sqrt(du * dv) > 0.8);
    for (std::size_t t = 1; t < fit.elbo_trace.size(); ++t) CHECK(fit.elbo_trace[t] >= fit.elbo_trace[t - 1]);
    for (double v : fit.u_sd) CHECK(v > 0.0);

    const auto od = overdispersion_scores(fit, s.z, s.y, s.physician_of, 40);
    CHECK(od.residuals.size() == 6000);
    double mean_od = 0.0;
    for (double v : od.od) {
      CHECK(v >= 0.0);
      mean_od += v / 40.0;
    }
    // Pearson residuals of a well specified model have unit mean square.
    CHECK(mean_od == doctest::Approx(1.0).epsilon(0.15));

    const auto cal = calibration_curve(fit, s.z, s.y, s.physician_of, 10);
    int total = 0;
    for (const auto& b : cal) {
      total += b.count;
      if (b.count >= 200) CHECK(std::abs(b.observed - b.mean_predicted) < 0.08);
      CHECK(b.mean_predicted >= b.lo);
      CHECK(b.mean_predicted <= b.hi);
    }
    CHECK(total == 6000);
  }

  TEST_CASE("fixed effects recovered at n = 10000") {
    const std::vector<double> truth{1.0, -1.0, 0.0, 0.0};
    const auto s = simulate(10000, 20, 0.0, truth, 0.5, 14);
    const auto fit = fit_vb(s.z, s.y, s.physician_of, 20);
    for (std::size_t c = 0; c < truth.size(); ++c) CHECK(std::abs(fit.beta[c] - truth[c]) <= 0.15);
  }

  TEST_CASE("no physician effect gives small random effects") {
    const auto s = simulate(10000, 20, 0.0, {1.0, -1.0}, 0.0, 15);
    const auto fit = fit_vb(s.z, s.y, s.physician_of, 20);
    for (double u : fit.u) CHECK(std::abs(u) <= 0.2);
  }

  TEST_CASE("patient order does not matter") {
    const auto s = simulate(3000, 10, 0.2, {0.8, -0.4}, 0.6, 16);
    std::vector<int> perm(3000);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(17));
    Matrix z(3000, 2);
    std::vector<int> y(3000), phys(3000);
    for (int i = 0; i < 3000; ++i) {
      const auto src = static_cast<std::size_t>(perm[static_cast<std::size_t>(i)]);
      z.row(i) = s.z.row(static_cast<Eigen::Index>(src));
      y[static_cast<std::size_t>(i)] = s.y[src];
      phys[static_cast<std::size_t>(i)] = s.physician_of[src];
    }
    const auto a = fit_vb(s.z, s.y, s.physician_of, 10);
    const auto b = fit_vb(z, y, phys, 10);
    CHECK(a.beta0 == doctest::Approx(b.beta0).epsilon(1e-3));
    for (std::size_t c = 0; c < 2; ++c) CHECK(std::abs(a.beta[c] - b.beta[c]) <= 1e-3);
    for (std::size_t j = 0; j < 10; ++j) CHECK(std::abs(a.u[j] - b.u[j]) <= 1e-3);
  }

  TEST_CASE("overdispersion of outcomes drawn from the fitted model is about one") {
    const auto fit = fixed_fit(-0.3, {0.9}, {0.4, -0.6});
    std::mt19937_64 gen(18);
    std::normal_distribution<double> norm;
    std::uniform_real_distribution<double> unif;
    const int n = 40000;
    Matrix z(n, 1);
    std::vector<int> phys(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      z(i, 0) = norm(gen);
      phys[static_cast<std::size_t>(i)] = i % 2;
    }
    const auto p = fitted_probabilities(fit, z, phys);
    for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = unif(gen) < p[static_cast<std::size_t>(i)];
    const auto od = overdispersion_scores(fit, z, y, phys, 2);
    for (double v : od.od) CHECK(v == doctest::Approx(1.0).epsilon(0.05));
  }

  TEST_CASE("perfect predictions give zero overdispersion") {
    const auto fit = fixed_fit(0.0, {0.0}, {60.0, -60.0});
    const Matrix z = Matrix::Zero(10, 1);
    const std::vector<int> phys{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    const std::vector<int> y{1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
    const auto od = overdispersion_scores(fit, z, y, phys, 2);
    for (double v : od.od) CHECK(v <= 1e-8);
    CHECK(od.clamped == 10);
  }

  TEST_CASE("calibrated predictions stay within binomial noise") {
    std::mt19937_64 gen(19);
    std::uniform_real_distribution<double> unif;
    std::vector<double> p(10000);
    std::vector<int> y(10000);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = unif(gen);
      y[i] = unif(gen) < p[i];
    }
    const auto cal = calibration_curve(p, y, 10);
    CHECK(cal.size() == 10);
    for (const auto& b : cal) CHECK(std::abs(b.observed - b.mean_predicted) <= 0.05);

    const std::vector<double> half(1000, 0.5);
    std::vector<int> coin(1000);
    for (int& v : coin) v = static_cast<int>(gen() & 1u);
    const auto one = calibration_curve(half, coin, 10);
    REQUIRE(one.size() == 1);
    CHECK(one[0].lo == doctest::Approx(0.5));
    CHECK(one[0].mean_predicted == doctest::Approx(0.5));
    CHECK(std::abs(one[0].observed - 0.5) <= 0.05);
  }

  TEST_CASE("calibration curve on exact inputs") {
    const std::vector<double> p{0.05, 0.15, 0.15, 0.95, 1.0};
    const std::vector<int> y{0, 1, 0, 1, 1};
    const auto cal = calibration_curve(p, y, 10);
    REQUIRE(cal.size() == 3);
    CHECK(cal[0].count == 1);
    CHECK(cal[1].observed == doctest::Approx(0.5));
    CHECK(cal[1].mean_predicted == doctest::Approx(0.15));
    CHECK(cal[2].count == 2);
    CHECK(cal[2].lo == doctest::Approx(0.9));

    const std::vector<double> flat(100, 0.5);
    std::vector<int> half(100, 0);
    for (int i = 0; i < 50; ++i) half[static_cast<std::size_t>(i)] = 1;
    const auto one = calibration_curve(flat, half, 10);
    REQUIRE(one.size() == 1);
    CHECK(one[0].observed == doctest::Approx(0.5));
  }

  TEST_CASE("degenerate inputs are fit errors") {
    auto s = simulate(200, 4, 0.0, {1.0, 0.0}, 0.5, 12);
    std::fill(s.y.begin(), s.y.end(), 0);
    CHECK_THROWS_AS(fit_vb(s.z, s.y, s.physician_of, 4), FitError);
    auto t = simulate(200, 4, 0.0, {1.0, 0.0}, 0.5, 13);
    std::fill(t.physician_of.begin(), t.physician_of.end(), 0);
    CHECK_THROWS_AS(fit_vb(t.z, t.y, t.physician_of, 1), FitError);
  }
}
