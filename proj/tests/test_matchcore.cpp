#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ipv/assignment.hpp"
#include "ipv/matchcore.hpp"
#include "oracles.hpp"

using namespace ipv;

namespace {

Matrix random_points(int n, int p, std::mt19937_64& gen) {
  std::normal_distribution<double> norm;
  Matrix m(n, p);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < p; ++k) m(i, k) = norm(gen);
  return m;
}

DistanceMatrix from_dense(const Matrix& d) {
  DistanceMatrix out;
  out.values = d;
  return out;
}

}  // namespace

TEST_SUITE("matchcore") {
  TEST_CASE("assignment is optimal on small random matrices") {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int t = 0; t < 300; ++t) {
      const int n = 1 + static_cast<int>(gen() % 7);
      RowMatrix c(n, n);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) c(i, k) = t % 3 == 0 ? std::floor(u(gen)) : u(gen);
      const auto col = linear_sum_assignment(c);
      std::vector<int> seen(col);
      std::sort(seen.begin(), seen.end());
      for (int i = 0; i < n; ++i) REQUIRE(seen[static_cast<std::size_t>(i)] == i);
      double cost = 0.0;
      for (int i = 0; i < n; ++i) cost += c(i, col[static_cast<std::size_t>(i)]);
      std::vector<int> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      double best = 1e300;
      do {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += c(i, perm[static_cast<std::size_t>(i)]);
        best = std::min(best, s);
      } while (std::next_permutation(perm.begin(), perm.end()));
      CHECK(cost == doctest::Approx(best).epsilon(1e-12));
    }
  }

  TEST_CASE("standardize: z-scores, robust scaling, fallbacks") {
    Matrix x(6, 3);
    x << 1, 5, 0, 2, 5, 0, 3, 5, 0, 4, 5, 1, 5, 5, 0, 6, 5, 0;
    const auto s = standardize(x);
    CHECK(s.z.col(0).mean() == doctest::Approx(0.0));
    const double sd = std::sqrt((s.z.col(0).array().square()).mean());
    CHECK(sd == doctest::Approx(1.0));
    CHECK(s.z.col(1).cwiseAbs().maxCoeff() == 0.0);  // constant column
    CHECK(s.robust_fallback[1]);
    CHECK(s.robust_fallback[2]);  // IQR zero for a rare binary
    CHECK(s.z_robust.col(2) == s.z.col(2));
    CHECK(s.column_medians(0) == doctest::Approx(3.5));
    CHECK(s.z_robust(0, 0) == doctest::Approx((1 - 3.5) / 2.5));
  }

  TEST_CASE("distance matrices are symmetric with zero diagonal") {
    std::mt19937_64 gen(2);
    const auto z = random_points(30, 4, gen);
    const Matrix prec = pseudo_inverse_psd(covariance(z));
    for (const Metric& metric : {Metric{EuclideanMetric{}}, Metric{MahalanobisMetric{prec}},
                                 Metric{WeightedMetric{{0.1, 0.2, 0.3, 0.4}}}}) {
      const auto d = distance_matrix(metric, z);
      for (int i = 0; i < 30; ++i) {
        CHECK(d(i, i) == 0.0);
        for (int k = 0; k < 30; ++k) {
          CHECK(d(i, k) >= 0.0);
          CHECK(d(i, k) == doctest::Approx(d(k, i)).epsilon(1e-12));
        }
      }
    }
  }

  TEST_CASE("uniform weights reproduce the scaled Euclidean distance") {
    std::mt19937_64 gen(3);
    const auto z = random_points(25, 9, gen);
    const auto e = distance_matrix(EuclideanMetric{}, z);
    const auto w = distance_matrix(WeightedMetric{std::vector<double>(9, 1.0 / 9.0)}, z);
    CHECK((e.values - w.values).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(e(0, 1) == doctest::Approx((z.row(0) - z.row(1)).norm() / 3.0));
  }

  TEST_CASE("Mahalanobis with identity covariance is plain Euclidean") {
    std::mt19937_64 gen(4);
    const auto z = random_points(10, 3, gen);
    const auto d = distance_matrix(MahalanobisMetric{Matrix::Identity(3, 3)}, z);
    CHECK(d(2, 5) == doctest::Approx((z.row(2) - z.row(5)).norm()));
    // Rank-deficient precision still gives a factor.
    Matrix singular = Matrix::Zero(3, 3);
    singular(0, 0) = 4.0;
    const Matrix L = precision_factor(singular);
    CHECK((L * L.transpose() - singular).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("pseudo-inverse of a singular covariance") {
    Matrix a(3, 3);
    a << 2, 0, 0, 0, 1, 0, 0, 0, 0;
    const Matrix p = pseudo_inverse_psd(a);
    CHECK(p(0, 0) == doctest::Approx(0.5));
    CHECK(p(1, 1) == doctest::Approx(1.0));
    CHECK(std::abs(p(2, 2)) < 1e-12);
    CHECK((a * p * a - a).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("panel permutation permutes the distance matrix") {
    std::mt19937_64 gen(5);
    const auto z = random_points(12, 4, gen);
    std::vector<int> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), gen);
    const auto a = distance_matrix(EuclideanMetric{}, z);
    const auto b = distance_matrix(EuclideanMetric{}, select_rows(z, perm));
    for (int i = 0; i < 12; ++i)
      for (int k = 0; k < 12; ++k) CHECK(b(i, k) == doctest::Approx(a(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(k)])));
  }

  TEST_CASE("caliper is the lower quartile of the off-diagonal entries") {
    Matrix d(4, 4);
    d << 0, 1, 2, 3, 1, 0, 4, 5, 2, 4, 0, 6, 3, 5, 6, 0;
    CHECK(caliper_value(from_dense(d)) == doctest::Approx(oracle::quantile7({1, 2, 3, 4, 5, 6}, 0.25)));
    CHECK(caliper_value(from_dense(d)) == doctest::Approx(2.25));
  }

  TEST_CASE("pairing worked example") {
    // Two tight pairs far apart.
    Matrix d(4, 4);
    d << 0, 1, 9, 9, 1, 0, 9, 9, 9, 9, 0, 1, 9, 9, 1, 0;
    const auto ps = pair_one_to_one(from_dense(d));
    REQUIRE(ps.pairs.size() == 2);
    CHECK(ps.pairs[0] == std::pair{0, 1});
    CHECK(ps.pairs[1] == std::pair{2, 3});
    const std::vector<int> y{1, 0, 1, 1};
    CHECK(*discordance_from_pairs(ps, y) == doctest::Approx(0.5));
    const std::vector<int> same{1, 1, 0, 0};
    CHECK(*discordance_from_pairs(ps, same) == 0.0);
    PairSet empty;
    CHECK_FALSE(discordance_from_pairs(empty, y).has_value());
  }

  TEST_CASE("pairing on random panels honours one-to-one and the caliper") {
    std::mt19937_64 gen(6);
    for (int t = 0; t < 50; ++t) {
      const int n = 5 + static_cast<int>(gen() % 60);
      const auto z = random_points(n, 3, gen);
      auto d = distance_matrix(EuclideanMetric{}, z);
      const auto copy = d.values;
      const auto ps = pair_one_to_one(d);
      const auto ps2 = pair_one_to_one_inplace(d);
      CHECK(d.values == copy);
      CHECK(ps.pairs == ps2.pairs);
      std::vector<int> used(static_cast<std::size_t>(n), 0);
      for (const auto& [a, b] : ps.pairs) {
        CHECK(a < b);
        CHECK(d(a, b) <= ps.caliper);
        ++used[static_cast<std::size_t>(a)];
        ++used[static_cast<std::size_t>(b)];
      }
      for (int u : used) CHECK(u <= 1);
      const auto again = pair_one_to_one(d);
      CHECK(again.pairs == ps.pairs);
    }
  }

  TEST_CASE("pairing matches the exhaustive reference on small panels") {
    std::mt19937_64 gen(7);
    for (int t = 0; t < 200; ++t) {
      const int n = 2 + static_cast<int>(gen() % 7);
      const auto z = random_points(n, 2, gen);
      const auto d = distance_matrix(EuclideanMetric{}, z);
      auto got = pair_one_to_one(d).pairs;
      std::sort(got.begin(), got.end());
      CHECK(got == oracle::reference_pairing(d.values));
    }
  }

  TEST_CASE("ties are broken by index") {
    // All off-diagonal distances equal.
    Matrix d = Matrix::Constant(4, 4, 1.0);
    d.diagonal().setZero();
    const auto a = pair_one_to_one(from_dense(d));
    const auto b = pair_one_to_one(from_dense(d));
    CHECK(a.pairs == b.pairs);
    CHECK(a.pairs.size() == 2);
  }
}
