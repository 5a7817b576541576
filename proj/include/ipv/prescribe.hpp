#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ipv/random.hpp"
#include "ipv/synthgen.hpp"

namespace ipv {

struct PhysicianProfile {
  int physician_id = 0;  // 0-based
  double p_high = 0.0;   // Pr(prescribe | eligible)
  double p_low = 0.0;    // Pr(prescribe | not eligible)
  std::optional<int> group;  // 1..5 under the five-group model
};

enum class PhysicianModel {
  /// Five behaviour groups of equal size with fixed (p_high, p_low) pairs.
  five_group,
  /// p_high ~ U(0.5, 1.0) independently, p_low = 0.05.
  continuous_uniform,
};

std::string physician_model_name(PhysicianModel m);
PhysicianModel physician_model_from(const std::string& name);

struct GroupLevels {
  double p_high;
  double p_low;
};
/// (p_high, p_low) of groups 1..5, from deterministic to coin-flip.
inline constexpr GroupLevels kFiveGroups[5] = {
    {1.00, 0.00}, {0.90, 0.05}, {0.80, 0.10}, {0.70, 0.20}, {0.50, 0.50}};

std::vector<PhysicianProfile> assign_profiles(PhysicianModel model, int n_physicians, Rng& rng);

/// Expected discordance of a random eligible pair: 2 p (1 - p).
double theoretical_discordance(double p_high);

struct OutcomeSet {
  std::vector<int> y;
  std::vector<int> m;
  std::vector<PhysicianProfile> profiles;
};

/// y_i ~ Bern(p_high) if m_i = 1 else Bern(p_low), drawn in patient order.
OutcomeSet draw_outcomes(const Cohort& cohort, std::vector<int> m, std::vector<PhysicianProfile> profiles,
                         Rng& rng);

/// Fraction of discordant pairs among all pairs of eligible outcomes,
/// n1 n0 / C(n, 2). Throws UndefinedError with fewer than two entries.
double ground_truth_discordance(std::span<const int> eligible_outcomes);

/// Per-physician ground truth over the eligible stratum of each panel;
/// nullopt for panels with fewer than two eligible patients.
std::vector<std::optional<double>> ground_truth_by_physician(const Cohort& cohort, const OutcomeSet& outcomes);

}  // namespace ipv
