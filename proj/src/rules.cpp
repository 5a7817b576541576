#include "ipv/rules.hpp"

#include <cmath>

#include "ipv/errors.hpp"
#include "ipv/stats.hpp"

namespace ipv {

namespace {

std::array<double, kNumCovariates> row_of(const Cohort& cohort, int i) {
  std::array<double, kNumCovariates> row{};
  for (int c = 0; c < kNumCovariates; ++c) row[static_cast<std::size_t>(c)] = cohort.covariates(i, c);
  return row;
}

}  // namespace

void ConjunctiveWindow::validate() const {
  if (active_indices.empty()) throw ConfigError("conjunctive window must not be empty");
  if (thresholds.size() != active_indices.size())
    throw ConfigError("conjunctive window: one threshold per active covariate required");
  for (std::size_t k = 0; k < active_indices.size(); ++k) {
    if (active_indices[k] < 0 || active_indices[k] >= kNumCovariates)
      throw ConfigError("conjunctive window: covariate index out of range");
    if (k > 0 && active_indices[k] != active_indices[k - 1] + 1)
      throw ConfigError("conjunctive window: active covariates must be consecutive");
  }
}

std::vector<double> calibrate_thresholds(const Cohort& cohort, std::span<const int> active_indices,
                                         double p_star) {
  if (!(p_star > 0.0 && p_star < 1.0)) throw ConfigError("calibrate_thresholds: p_star must lie in (0,1)");
  if (active_indices.empty()) throw ConfigError("calibrate_thresholds: empty window");
  const double level = std::pow(p_star, 1.0 / static_cast<double>(active_indices.size()));
  std::vector<double> tau;
  tau.reserve(active_indices.size());
  for (int c : active_indices) {
    const auto col = cohort.covariates.col(c);
    tau.push_back(stats::quantile(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())), level));
  }
  return tau;
}

int conjunctive_eligible(std::span<const double> row, const ConjunctiveWindow& rule) {
  for (std::size_t k = 0; k < rule.active_indices.size(); ++k)
    if (!(row[static_cast<std::size_t>(rule.active_indices[k])] <= rule.thresholds[k])) return 0;
  return 1;
}

std::vector<int> evaluate_eligibility(const Cohort& cohort, const EligibilityRule& rule) {
  std::vector<int> m(static_cast<std::size_t>(cohort.n()));
  if (const auto* s = std::get_if<Score2Rule>(&rule)) {
    for (int i = 0; i < cohort.n(); ++i) {
      const auto row = row_of(cohort, i);
      m[static_cast<std::size_t>(i)] = score2_eligible(row[kAge], score2_risk(row, *s->coeffs));
    }
  } else {
    const auto& w = std::get<ConjunctiveWindow>(rule);
    w.validate();
    for (int i = 0; i < cohort.n(); ++i) m[static_cast<std::size_t>(i)] = conjunctive_eligible(row_of(cohort, i), w);
  }
  return m;
}

}  // namespace ipv
