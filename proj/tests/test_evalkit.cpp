#include <doctest.h>

#include <cmath>
#include <random>

#include "ipv/catalog.hpp"
#include "ipv/evalkit.hpp"

using namespace ipv;

namespace {

using Opt = std::vector<std::optional<double>>;

Opt opt(std::initializer_list<double> v) {
  Opt out;
  for (double x : v) out.emplace_back(x);
  return out;
}

}  // namespace

TEST_SUITE("evalkit") {
  TEST_CASE("method names round-trip") {
    for (auto m : kAllMethods) CHECK(method_from(method_name(m)) == m);
    CHECK(parse_methods("all").size() == 8);
    const auto two = parse_methods("glmm,euclidean");
    REQUIRE(two.size() == 2);
    CHECK(two[0] == Method::euclidean);
    CHECK_THROWS(parse_methods("nearest"));
    CHECK(!is_rate_scale(Method::glmm));
    CHECK(is_unsupervised(Method::lpa_guided));
    CHECK(is_feature_weighted(Method::mutual_info));
    CHECK(!is_feature_weighted(Method::genetic_mahalanobis));
  }

  TEST_CASE("mean delta trivial cases") {
    const auto gt = opt({0.0, 0.2});
    CHECK(*mean_delta(gt, gt).value == 0.0);
    CHECK(*mean_delta(opt({0.1, 0.3}), gt).value == doctest::Approx(0.1));
  }

  TEST_CASE("mean delta on a worked example") {
    const auto est = opt({0.3, 0.5, 0.1});
    const auto gt = opt({0.2, 0.5, 0.3});
    const auto r = mean_delta(est, gt);
    REQUIRE(r.value.has_value());
    CHECK(*r.value == doctest::Approx((0.1 + 0.0 - 0.2) / 3.0));
    CHECK(r.used == 3);

    Opt partial = est;
    partial[1].reset();
    const auto p = mean_delta(partial, gt);
    CHECK(p.used == 2);
    CHECK(p.excluded == 1);
    CHECK(*p.value == doctest::Approx(-0.05));
    CHECK(!mean_delta(Opt(3), gt).value.has_value());
  }

  TEST_CASE("mean delta shifts linearly") {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> unif;
    Opt est(30), gt(30), shifted(30);
    for (int i = 0; i < 30; ++i) {
      est[static_cast<std::size_t>(i)] = unif(gen);
      gt[static_cast<std::size_t>(i)] = unif(gen);
      shifted[static_cast<std::size_t>(i)] = *est[static_cast<std::size_t>(i)] + 0.17;
    }
    CHECK(*mean_delta(shifted, gt).value == doctest::Approx(*mean_delta(est, gt).value + 0.17));
  }

  TEST_CASE("Spearman rank correlation") {
    const auto a = opt({1, 2, 3, 4, 5});
    CHECK(*spearman_rank(a, a).rho == doctest::Approx(1.0));
    CHECK(*spearman_rank(a, opt({5, 4, 3, 2, 1})).rho == doctest::Approx(-1.0));
    // Monotone transforms do not change ranks.
    CHECK(*spearman_rank(opt({0.1, 3, 2, 9, 4}), a).rho ==
          doctest::Approx(*spearman_rank(opt({std::exp(0.1), std::exp(3.0), std::exp(2.0), std::exp(9.0), std::exp(4.0)}), a).rho));
    // Ties take average ranks: ranks (1.5, 1.5, 3) vs (1, 2, 3).
    CHECK(*spearman_rank(opt({1, 1, 2}), opt({1, 2, 3})).rho == doctest::Approx(std::sqrt(0.75)));
    CHECK(!spearman_rank(opt({1, 1, 1}), opt({1, 2, 3})).rho.has_value());
    CHECK(!spearman_rank(opt({1, 2}), opt({1, 2})).rho.has_value());
    Opt holes = opt({1, 2, 3, 4});
    holes[0].reset();
    const auto r = spearman_rank(holes, opt({4, 1, 2, 3}));
    CHECK(r.used == 3);
    CHECK(*r.rho == doctest::Approx(1.0));
  }

  TEST_CASE("percentile bootstrap") {
    const std::vector<double> constant(20, 0.4);
    const auto c = percentile_bootstrap(constant, mean_statistic);
    CHECK(c.point == doctest::Approx(0.4));
    CHECK(c.lo == doctest::Approx(0.4));
    CHECK(c.hi == doctest::Approx(0.4));

    std::vector<double> v;
    std::mt19937_64 gen(2);
    std::normal_distribution<double> norm;
    for (int i = 0; i < 200; ++i) v.push_back(norm(gen));
    const auto a = percentile_bootstrap(v, mean_statistic, 2000, 42);
    const auto b = percentile_bootstrap(v, mean_statistic, 2000, 42);
    CHECK(a.lo == b.lo);
    CHECK(a.hi == b.hi);
    CHECK(a.point == doctest::Approx(mean_statistic(v)));
    CHECK(a.lo < a.point);
    CHECK(a.hi > a.point);
    // Width close to 2 * 1.96 / sqrt(n).
    CHECK((a.hi - a.lo) == doctest::Approx(2 * 1.96 / std::sqrt(200.0)).epsilon(0.15));
    CHECK(percentile_bootstrap(v, mean_statistic, 2000, 43).lo != a.lo);
  }

  TEST_CASE("summary statistics") {
    const std::vector<double> v{-1.0, 0.0, 2.0, 3.0};
    CHECK(mean_statistic(v) == doctest::Approx(1.0));
    CHECK(mean_abs_statistic(v) == doctest::Approx(1.5));
    CHECK(median_statistic(v) == doctest::Approx(1.0));
    CHECK(percent_positive_statistic(v) == doctest::Approx(50.0));
    CHECK(percent_positive_statistic(std::vector<double>{0.0, 0.0}) == 0.0);
  }

  TEST_CASE("window bins cover the progressive catalog 18 / 30 / 30 / 12") {
    CHECK(window_bin(1) == 0);
    CHECK(window_bin(3) == 1);
    CHECK(window_bin(4) == 2);
    CHECK(window_bin(9) == 3);
    std::array<int, 4> counts{};
    for (const auto& s : build_catalog(MasterConfig{}))
      if (s.kind == ExperimentKind::progressive) ++counts[static_cast<std::size_t>(window_bin(*s.window_width))];
    CHECK(counts == std::array<int, 4>{18, 30, 30, 12});
  }

  TEST_CASE("report JSON round-trip") {
    ExperimentReport r;
    r.spec = build_catalog(MasterConfig{})[0];
    r.panel_sizes = {3, 4};
    r.eligible_counts = {2, 3};
    r.ground_truth = {0.5, std::nullopt};
    r.theoretical = {0.32, 0.5};
    r.eligible_fraction = 0.25;
    MethodResult m;
    m.method = Method::mutual_info;
    m.scores = {0.25, std::nullopt};
    m.delta = mean_delta(m.scores, r.ground_truth);
    m.diagnostics = {{"mi_weights", {0.5, 0.5}}};
    r.methods.push_back(m);
    const auto back = report_from_json(report_to_json(r));
    CHECK(back.spec.id == r.spec.id);
    CHECK(back.ground_truth == r.ground_truth);
    CHECK(back.theoretical == r.theoretical);
    REQUIRE(back.find(Method::mutual_info) != nullptr);
    CHECK(back.find(Method::mutual_info)->scores == m.scores);
    CHECK(*back.find(Method::mutual_info)->delta.value == doctest::Approx(-0.25));
    CHECK(back.find(Method::euclidean) == nullptr);
    CHECK(report_to_json(back) == report_to_json(r));
  }
}
