#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ipv/errors.hpp"
#include "ipv/genmatch.hpp"
#include "oracles.hpp"

using namespace ipv;

namespace {

struct Problem {
  Matrix z;
  std::vector<int> y;
};

Problem random_problem(int n, int p, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> norm;
  Problem pr{Matrix(n, p), std::vector<int>(static_cast<std::size_t>(n))};
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < p; ++c) pr.z(i, c) = norm(gen);
    pr.y[static_cast<std::size_t>(i)] = (pr.z(i, 0) + 0.5 * norm(gen)) > 0.3 ? 1 : 0;
  }
  pr.y[0] = 1;
  pr.y[1] = 0;
  return pr;
}

}  // namespace

TEST_SUITE("genmatch") {
  TEST_CASE("balance loss agrees with brute-force matching") {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> unif(0.0, 10.0);
    for (int t = 0; t < 50; ++t) {
      const auto pr = random_problem(40, 4, 100 + static_cast<std::uint64_t>(t));
      std::vector<double> w(4);
      for (double& v : w) v = unif(gen);
      CHECK(balance_loss(w, pr.z, pr.y) == doctest::Approx(oracle::brute_balance_loss(w, pr.z, pr.y)).epsilon(1e-12));
      CHECK(nearest_controls(w, pr.z, pr.y) == oracle::brute_nearest_controls(w, pr.z, pr.y));
    }
  }

  TEST_CASE("identical treated and control sets balance perfectly") {
    Matrix z(6, 2);
    z << 0, 1, 2, 3, -1, 5, 0, 1, 2, 3, -1, 5;
    const std::vector<int> y{1, 1, 1, 0, 0, 0};
    CHECK(balance_loss(std::vector<double>{1, 1}, z, y) == 0.0);
  }

  TEST_CASE("three-by-three toy set against exhaustive enumeration") {
    Matrix z(6, 2);
    z << 0.0, 0.0, 1.0, 2.0, 3.0, -1.0, 0.2, 0.1, 2.5, -0.5, 1.1, 2.4;
    const std::vector<int> y{1, 1, 1, 0, 0, 0};
    for (const auto& w : {std::vector<double>{1, 1}, std::vector<double>{5, 0.5}, std::vector<double>{0.1, 9}}) {
      CHECK(nearest_controls(w, z, y) == oracle::brute_nearest_controls(w, z, y));
      CHECK(balance_loss(w, z, y) == doctest::Approx(oracle::brute_balance_loss(w, z, y)).epsilon(1e-12));
    }
  }

  TEST_CASE("zero weights give an infinite loss") {
    const auto pr = random_problem(20, 3, 2);
    CHECK(balance_loss(std::vector<double>{0, 0, 0}, pr.z, pr.y) == std::numeric_limits<double>::infinity());
  }

  TEST_CASE("scaling the weights leaves the loss unchanged") {
    const auto pr = random_problem(60, 3, 3);
    const std::vector<double> w{1, 2, 3}, w2{2, 4, 6};
    CHECK(balance_loss(w, pr.z, pr.y) == doctest::Approx(balance_loss(w2, pr.z, pr.y)));
  }

  TEST_CASE("differential evolution") {
    const auto pr = random_problem(300, 4, 4);
    DEConfig cfg;
    cfg.population_size = 20;
    cfg.max_generations = 5;
    cfg.seed = 77;
    const auto a = optimize_weights(pr.z, pr.y, cfg);
    const auto b = optimize_weights(pr.z, pr.y, cfg);
    CHECK(a.w_hat == b.w_hat);
    CHECK(a.achieved_loss == b.achieved_loss);
    CHECK(a.evaluations == cfg.evaluation_budget());
    CHECK(a.evaluations == 120);
    CHECK(a.achieved_loss <= balance_loss(std::vector<double>(4, 1.0), pr.z, pr.y));
    CHECK(a.achieved_loss == doctest::Approx(balance_loss(a.w_hat, pr.z, pr.y)));
    REQUIRE(a.loss_trace.size() == 6);
    for (std::size_t g = 1; g < a.loss_trace.size(); ++g) CHECK(a.loss_trace[g] <= a.loss_trace[g - 1]);
    for (double v : a.w_hat) {
      CHECK(v >= cfg.lower);
      CHECK(v <= cfg.upper);
    }
  }

  TEST_CASE("default budget and validation") {
    DEConfig cfg;
    CHECK(cfg.evaluation_budget() == 1485);
    CHECK(cfg.evaluation_budget() >= 0.8 * 1500);
    CHECK(cfg.evaluation_budget() <= 1.2 * 1500);
    cfg.crossover = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("two identical patients with equal outcomes are concordant") {
    DistanceMatrix d;
    d.values = RowMatrix::Zero(2, 2);
    const auto r = nn_discordance_with_caliper(d, std::vector<int>{1, 1});
    REQUIRE(r.has_value());
    CHECK(*r == 0.0);
  }

  TEST_CASE("five-patient panel against hand-enumerated neighbours") {
    // Positions 0, 2, 3, 7, 7.5 with outcomes 1, 1, 0, 0, 1.
    const std::vector<double> pos{0.0, 2.0, 3.0, 7.0, 7.5};
    DistanceMatrix d;
    d.values = RowMatrix::Zero(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int k = 0; k < 5; ++k) d.values(i, k) = std::abs(pos[static_cast<std::size_t>(i)] - pos[static_cast<std::size_t>(k)]);
    // Sorted pair distances 0.5 1 2 3 4 4.5 5 5.5 7 7.5 -> q25 at h = 2.25 -> 2.25.
    // nn: 0->1 (2), 1->2 (1), 2->1 (1), 3->4 (0.5), 4->3 (0.5); all within the caliper.
    // Discordant: 1-2, 2-1, 3-4, 4-3 -> 4 of 5.
    int kept = 0;
    double cal = 0.0;
    const auto r = nn_discordance_with_caliper(d, std::vector<int>{1, 1, 0, 0, 1}, &kept, &cal);
    CHECK(cal == doctest::Approx(2.25));
    CHECK(kept == 5);
    REQUIRE(r.has_value());
    CHECK(*r == doctest::Approx(0.8));
  }

  TEST_CASE("nearest-neighbour caliper rule") {
    // Points on a line: 0, 1, 1.5, 10.
    const std::vector<double> pos{0.0, 1.0, 1.5, 10.0};
    DistanceMatrix d;
    d.values = RowMatrix::Zero(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 4; ++k) d.values(i, k) = std::abs(pos[static_cast<std::size_t>(i)] - pos[static_cast<std::size_t>(k)]);
    // Off-diagonal upper entries: 1, 1.5, 10, 0.5, 9, 8.5 -> q25 = 1.125.
    const std::vector<int> y{1, 0, 1, 0};
    int kept = 0;
    double cal = 0.0;
    const auto r = nn_discordance_with_caliper(d, y, &kept, &cal);
    CHECK(cal == doctest::Approx(1.125));
    // nn: 0->1 (1.0), 1->2 (0.5), 2->1 (0.5), 3->2 (8.5, dropped).
    CHECK(kept == 3);
    REQUIRE(r.has_value());
    CHECK(*r == doctest::Approx(1.0));
  }
}
