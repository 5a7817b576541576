#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "ipv/cohort_io.hpp"
#include "ipv/errors.hpp"
#include "ipv/random.hpp"
#include "ipv/stats.hpp"
#include "ipv/synthgen.hpp"

using namespace ipv;

namespace {
std::vector<double> column(const Matrix& m, int c) {
  std::vector<double> v(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = m(i, c);
  return v;
}
}  // namespace

TEST_SUITE("synthgen") {
  TEST_CASE("seed derivation is a pure function of its labels") {
    CHECK(derive_seed(42, {"a", "cohort"}) == derive_seed(42, {"a", "cohort"}));
    CHECK(derive_seed(42, {"a", "cohort"}) != derive_seed(42, {"a", "stages"}));
    CHECK(derive_seed(42, {"ab"}) != derive_seed(42, {"a", "b"}));
    CHECK(derive_seed(1, 7) != derive_seed(2, 7));
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) CHECK(a() == b());
  }

  TEST_CASE("uniform and normal variates have the right moments") {
    Rng rng(11);
    std::vector<double> u(200000), z(200000);
    for (auto& v : u) v = rng.uniform();
    for (auto& v : z) v = rng.normal();
    CHECK(stats::mean(u) == doctest::Approx(0.5).epsilon(0.01));
    CHECK(stats::mean(z) == doctest::Approx(0.0).epsilon(0.01));
    CHECK(stats::stddev(z) == doctest::Approx(1.0).epsilon(0.01));
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
    for (int c : counts) CHECK(std::abs(c - 10000) < 400);
  }

  TEST_CASE("allocation keeps the panel floor") {
    Rng rng(3);
    const auto a = allocate_physicians(10000, 20, 90, rng);
    std::vector<int> sizes(20, 0);
    for (int j : a) ++sizes[static_cast<std::size_t>(j)];
    CHECK(std::accumulate(sizes.begin(), sizes.end(), 0) == 10000);
    for (int s : sizes) CHECK(s >= 90);

    Rng rng2(4);
    const auto exact = allocate_physicians(180, 2, 90, rng2);
    CHECK(std::count(exact.begin(), exact.end(), 0) == 90);
    CHECK(std::count(exact.begin(), exact.end(), 1) == 90);

    Rng rng3(5);
    CHECK_THROWS_AS(allocate_physicians(100, 2, 90, rng3), ConfigError);
  }

  TEST_CASE("remainder is uniform over physicians") {
    double total = 0.0;
    const int seeds = 10000;
    for (int s = 0; s < seeds; ++s) {
      Rng rng(derive_seed(99, static_cast<std::uint64_t>(s)));
      const auto a = allocate_physicians(200, 2, 90, rng);
      total += static_cast<double>(std::count(a.begin(), a.end(), 0)) - 90.0;
    }
    CHECK(std::abs(total / seeds - 10.0) < 0.3);
  }

  TEST_CASE("default cohort respects marginals and ranges") {
    CohortConfig cfg;
    cfg.seed = 17;
    const auto cohort = generate_cohort(cfg);
    const auto specs = default_covariates();
    const auto age = column(cohort.covariates, kAge);
    CHECK(std::abs(stats::mean(age) - 60.0) < 0.5);
    for (int c = 0; c < kNumCovariates; ++c) {
      const auto v = column(cohort.covariates, c);
      const auto& s = specs[static_cast<std::size_t>(c)];
      for (double x : v) {
        REQUIRE(x >= s.lo);
        REQUIRE(x <= s.hi);
        if (s.kind != ValueKind::continuous) REQUIRE(x == std::round(x));
      }
    }
    const auto smoker = column(cohort.covariates, kSmoker);
    CHECK(stats::mean(smoker) == doctest::Approx(0.20).epsilon(0.1));
    // Independence: all pairwise correlations small.
    for (int a = 0; a < kNumCovariates; ++a)
      for (int b = a + 1; b < kNumCovariates; ++b) {
        const auto r = stats::pearson(column(cohort.covariates, a), column(cohort.covariates, b));
        REQUIRE(r);
        CHECK(std::abs(*r) < 0.05);
      }
  }

  TEST_CASE("generation is deterministic") {
    CohortConfig cfg;
    cfg.seed = 8;
    cfg.n_patients = 2000;
    const auto a = generate_cohort(cfg);
    const auto b = generate_cohort(cfg);
    CHECK(a.covariates == b.covariates);
    CHECK(a.physician_of == b.physician_of);
    cfg.seed = 9;
    CHECK(generate_cohort(cfg).covariates != a.covariates);
  }

  TEST_CASE("copula variant hits the target Spearman correlation") {
    CohortConfig cfg;
    cfg.seed = 21;
    cfg.variant = CopulaVariant{0.8};
    const auto cohort = generate_cohort(cfg);
    const auto rho = stats::spearman(column(cohort.covariates, kNonHdl), column(cohort.covariates, kLdl));
    REQUIRE(rho);
    CHECK(*rho >= 0.75);
    CHECK(*rho <= 0.82);
    // Marginals are those of the independent draw.
    CohortConfig ind = cfg;
    ind.variant = IndependentVariant{};
    const auto base = generate_cohort(ind);
    auto a = column(cohort.covariates, kLdl), b = column(base.covariates, kLdl);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }

  TEST_CASE("lognormal HbA1c variant") {
    CohortConfig cfg;
    cfg.seed = 22;
    cfg.variant = LognormalHba1cVariant{1.846, 0.228};
    const auto cohort = generate_cohort(cfg);
    const auto h = column(cohort.covariates, kHba1c);
    CHECK(stats::mean(h) == doctest::Approx(6.48).epsilon(0.10));
    CHECK(stats::stddev(h) == doctest::Approx(1.48).epsilon(0.10));
    CHECK(stats::skewness(h) == doctest::Approx(0.70).epsilon(0.10));
  }

  TEST_CASE("invalid configurations are rejected") {
    CohortConfig cfg;
    cfg.n_physicians = 200;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CohortConfig bad;
    bad.covariates[kAge].lo = 95.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CohortConfig bad2;
    bad2.covariates[kSmoker].distribution = Bernoulli{1.5};
    CHECK_THROWS_AS(bad2.validate(), ConfigError);
  }

  TEST_CASE("CSV export round-trips") {
    CohortConfig cfg;
    cfg.seed = 30;
    cfg.n_patients = 300;
    cfg.n_physicians = 3;
    const auto cohort = generate_cohort(cfg);
    std::vector<int> y(300), m(300);
    for (int i = 0; i < 300; ++i) {
      y[static_cast<std::size_t>(i)] = i % 2;
      m[static_cast<std::size_t>(i)] = i % 3 == 0;
    }
    const auto path = std::filesystem::temp_directory_path() / "ipv_cohort_roundtrip.csv";
    write_cohort_csv(path, cohort, &y, &m);
    const auto loaded = read_cohort_csv(path);
    CHECK(loaded.cohort.physician_of == cohort.physician_of);
    CHECK((loaded.cohort.covariates - cohort.covariates).cwiseAbs().maxCoeff() == 0.0);
    CHECK(loaded.cohort.config.seed == cfg.seed);
    REQUIRE(loaded.y);
    CHECK(*loaded.y == y);
    CHECK(*loaded.m == m);
  }
}
