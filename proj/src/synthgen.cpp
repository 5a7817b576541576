#include "ipv/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ipv/errors.hpp"

namespace ipv {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double draw_value(const CovariateSpec& spec, Rng& rng) {
  double v = std::visit(Overloaded{
                            [&](const Gaussian& g) { return rng.normal(g.mean, g.sd); },
                            [&](const Bernoulli& b) { return rng.bernoulli(b.prob) ? 1.0 : 0.0; },
                            [&](const LogNormal& l) { return std::exp(rng.normal(l.mu, l.sigma)); },
                        },
                        spec.distribution);
  if (spec.kind == ValueKind::binary) return v;
  v = std::clamp(v, spec.lo, spec.hi);
  if (spec.kind == ValueKind::integer) v = std::round(v);
  return v;
}

// Reorder `column` so that its ranks follow `latent` while keeping the same
// multiset of values (inverse empirical marginal applied to the copula ranks).
void impose_ranks(Eigen::Ref<Vector> column, const std::vector<double>& latent) {
  const auto n = static_cast<std::size_t>(column.size());
  std::vector<double> sorted(column.data(), column.data() + n);
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return latent[a] < latent[b]; });
  for (std::size_t r = 0; r < n; ++r) column(static_cast<Eigen::Index>(order[r])) = sorted[r];
}

}  // namespace

void CovariateSpec::validate() const {
  if (kind != ValueKind::binary && !(lo < hi))
    throw ConfigError("covariate '" + name + "': clip range must satisfy lo < hi");
  if (const auto* b = std::get_if<Bernoulli>(&distribution)) {
    if (!(b->prob >= 0.0 && b->prob <= 1.0))
      throw ConfigError("covariate '" + name + "': bernoulli probability outside [0,1]");
  }
  if (const auto* g = std::get_if<Gaussian>(&distribution); g && !(g->sd > 0.0))
    throw ConfigError("covariate '" + name + "': gaussian sd must be positive");
  if (const auto* l = std::get_if<LogNormal>(&distribution); l && !(l->sigma > 0.0))
    throw ConfigError("covariate '" + name + "': lognormal sigma must be positive");
}

std::vector<CovariateSpec> default_covariates() {
  return {
      {"age", Gaussian{60.0, 12.0}, 40.0, 90.0, ValueKind::integer},
      {"hba1c", Gaussian{6.5, 1.5}, 4.0, 12.0, ValueKind::continuous},
      {"non_hdl", Gaussian{3.6, 0.95}, 1.0, 8.0, ValueKind::continuous},
      {"hdl", Gaussian{1.35, 0.38}, 0.4, 2.8, ValueKind::continuous},
      {"ldl", Gaussian{1.3, 0.35}, 0.4, 2.2, ValueKind::continuous},
      {"sbp", Gaussian{130.0, 20.0}, 90.0, 200.0, ValueKind::integer},
      {"egfr", Gaussian{90.0, 25.0}, 15.0, 140.0, ValueKind::continuous},
      {"smoker", Bernoulli{0.20}, 0.0, 1.0, ValueKind::binary},
      {"male", Bernoulli{0.60}, 0.0, 1.0, ValueKind::binary},
  };
}

std::string variant_name(const CohortVariant& v) {
  return std::visit(Overloaded{
                        [](const IndependentVariant&) { return std::string("independent"); },
                        [](const CopulaVariant&) { return std::string("copula_nonhdl_ldl"); },
                        [](const LognormalHba1cVariant&) { return std::string("lognormal_hba1c"); },
                    },
                    v);
}

void CohortConfig::validate() const {
  if (n_patients < 2) throw ConfigError("cohort needs at least two patients");
  if (n_physicians < 1) throw ConfigError("cohort needs at least one physician");
  if (min_panel_size < 0) throw ConfigError("min_panel_size must be non-negative");
  if (static_cast<long long>(n_physicians) * min_panel_size > n_patients)
    throw ConfigError("infeasible allocation: n_physicians x min_panel_size exceeds n_patients");
  if (covariates.size() != static_cast<std::size_t>(kNumCovariates))
    throw ConfigError("cohort requires exactly 9 covariates in the fixed order");
  const auto defaults = default_covariates();
  for (std::size_t c = 0; c < covariates.size(); ++c) {
    covariates[c].validate();
    if (covariates[c].name != defaults[c].name)
      throw ConfigError("covariate " + std::to_string(c) + " must be '" + defaults[c].name + "'");
  }
  if (const auto* cv = std::get_if<CopulaVariant>(&variant); cv && !(std::abs(cv->rho_target) < 1.0))
    throw ConfigError("copula rho_target must lie in (-1, 1)");
  if (const auto* lv = std::get_if<LognormalHba1cVariant>(&variant); lv && !(lv->sigma > 0.0))
    throw ConfigError("lognormal sigma must be positive");
}

std::vector<std::vector<int>> Cohort::panels() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(config.n_physicians));
  for (int i = 0; i < n(); ++i) out[static_cast<std::size_t>(physician_of[static_cast<std::size_t>(i)])].push_back(i);
  return out;
}

std::vector<int> allocate_physicians(int n, int n_physicians, int min_panel, Rng& rng) {
  if (n_physicians < 1) throw ConfigError("allocate_physicians: need at least one physician");
  if (static_cast<long long>(n_physicians) * min_panel > n)
    throw ConfigError("allocate_physicians: n_physicians x min_panel exceeds n");
  std::vector<int> assignment(static_cast<std::size_t>(n));
  const int floor_total = n_physicians * min_panel;
  for (int i = 0; i < floor_total; ++i) assignment[static_cast<std::size_t>(i)] = i / min_panel;
  for (int i = floor_total; i < n; ++i)
    assignment[static_cast<std::size_t>(i)] =
        static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n_physicians)));
  return assignment;
}

Cohort generate_cohort(const CohortConfig& config) {
  config.validate();
  Cohort cohort;
  cohort.config = config;
  const int n = config.n_patients;

  Rng alloc_rng(derive_seed(config.seed, {"allocate"}));
  cohort.physician_of = allocate_physicians(n, config.n_physicians, config.min_panel_size, alloc_rng);

  std::vector<CovariateSpec> specs = config.covariates;
  if (const auto* lv = std::get_if<LognormalHba1cVariant>(&config.variant))
    specs[kHba1c].distribution = LogNormal{lv->mu, lv->sigma};

  // One stream per covariate, so swapping one marginal leaves the others untouched.
  cohort.covariates.resize(n, kNumCovariates);
  for (int c = 0; c < kNumCovariates; ++c) {
    Rng rng(derive_seed(config.seed, {"covariate", specs[static_cast<std::size_t>(c)].name}));
    for (int i = 0; i < n; ++i) cohort.covariates(i, c) = draw_value(specs[static_cast<std::size_t>(c)], rng);
  }

  if (const auto* cv = std::get_if<CopulaVariant>(&config.variant)) {
    // Spearman rho_s of a bivariate normal relates to its Pearson r by r = 2 sin(pi rho_s / 6).
    const double r = 2.0 * std::sin(std::numbers::pi * cv->rho_target / 6.0);
    const double s = std::sqrt(1.0 - r * r);
    Rng rng(derive_seed(config.seed, {"copula"}));
    std::vector<double> g1(static_cast<std::size_t>(n)), g2(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double a = rng.normal();
      const double b = rng.normal();
      g1[static_cast<std::size_t>(i)] = a;
      g2[static_cast<std::size_t>(i)] = r * a + s * b;
    }
    impose_ranks(cohort.covariates.col(kNonHdl), g1);
    impose_ranks(cohort.covariates.col(kLdl), g2);
  }
  return cohort;
}

}  // namespace ipv
