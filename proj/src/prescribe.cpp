#include "ipv/prescribe.hpp"

#include "ipv/errors.hpp"

namespace ipv {

std::string physician_model_name(PhysicianModel m) {
  return m == PhysicianModel::five_group ? "five_group" : "continuous_uniform";
}

PhysicianModel physician_model_from(const std::string& name) {
  if (name == "five_group") return PhysicianModel::five_group;
  if (name == "continuous_uniform") return PhysicianModel::continuous_uniform;
  throw ConfigError("unknown physician model '" + name + "'");
}

std::vector<PhysicianProfile> assign_profiles(PhysicianModel model, int n_physicians, Rng& rng) {
  if (n_physicians < 1) throw ConfigError("assign_profiles: need at least one physician");
  std::vector<PhysicianProfile> out(static_cast<std::size_t>(n_physicians));
  if (model == PhysicianModel::five_group) {
    if (n_physicians % 5 != 0) throw ConfigError("five-group physician model requires J divisible by 5");
    const int per_group = n_physicians / 5;
    for (int j = 0; j < n_physicians; ++j) {
      const int g = j / per_group;
      out[static_cast<std::size_t>(j)] = {j, kFiveGroups[g].p_high, kFiveGroups[g].p_low, g + 1};
    }
  } else {
    for (int j = 0; j < n_physicians; ++j)
      out[static_cast<std::size_t>(j)] = {j, rng.uniform(0.5, 1.0), 0.05, std::nullopt};
  }
  return out;
}

double theoretical_discordance(double p_high) { return 2.0 * p_high * (1.0 - p_high); }

OutcomeSet draw_outcomes(const Cohort& cohort, std::vector<int> m, std::vector<PhysicianProfile> profiles,
                         Rng& rng) {
  if (m.size() != static_cast<std::size_t>(cohort.n()))
    throw ConfigError("draw_outcomes: eligibility vector length differs from cohort size");
  if (profiles.size() != static_cast<std::size_t>(cohort.n_physicians()))
    throw ConfigError("draw_outcomes: one profile per physician required");
  OutcomeSet out;
  out.y.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& prof = profiles[static_cast<std::size_t>(cohort.physician_of[i])];
    out.y[i] = rng.bernoulli(m[i] != 0 ? prof.p_high : prof.p_low) ? 1 : 0;
  }
  out.m = std::move(m);
  out.profiles = std::move(profiles);
  return out;
}

double ground_truth_discordance(std::span<const int> eligible_outcomes) {
  const auto n = static_cast<double>(eligible_outcomes.size());
  if (eligible_outcomes.size() < 2)
    throw UndefinedError("ground truth discordance needs at least two eligible patients");
  double n1 = 0.0;
  for (int y : eligible_outcomes) n1 += (y != 0) ? 1.0 : 0.0;
  const double n0 = n - n1;
  return (n1 * n0) / (0.5 * n * (n - 1.0));
}

std::vector<std::optional<double>> ground_truth_by_physician(const Cohort& cohort, const OutcomeSet& outcomes) {
  std::vector<std::vector<int>> eligible(static_cast<std::size_t>(cohort.n_physicians()));
  for (int i = 0; i < cohort.n(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (outcomes.m[ui] != 0) eligible[static_cast<std::size_t>(cohort.physician_of[ui])].push_back(outcomes.y[ui]);
  }
  std::vector<std::optional<double>> gt(eligible.size());
  for (std::size_t j = 0; j < eligible.size(); ++j)
    if (eligible[j].size() >= 2) gt[j] = ground_truth_discordance(eligible[j]);
  return gt;
}

}  // namespace ipv
