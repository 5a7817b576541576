#pragma once

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "ipv/prescribe.hpp"
#include "ipv/synthgen.hpp"

namespace ipv {

enum class ExperimentKind { score2, progressive, sensitivity_copula, sensitivity_lognormal, continuous, grid };

std::string experiment_kind_name(ExperimentKind k);
ExperimentKind experiment_kind_from(const std::string& s);

/// One experimental condition. The eligibility rule is either SCORE2 (empty
/// window) or a conjunctive window whose thresholds are calibrated on the
/// generated cohort at run time from p_star.
struct ExperimentSpec {
  std::string id;
  ExperimentKind kind = ExperimentKind::score2;
  std::vector<int> window;  // active covariate indices; empty for SCORE2
  PhysicianModel physician_model = PhysicianModel::five_group;
  CohortConfig cohort;
  std::optional<int> pass_index;
  std::optional<int> window_width;
  std::optional<int> window_start;  // 1-based position of the first active covariate
  std::optional<double> p_star;
  std::optional<int> grid_replicate;
  /// Root of the per-stage streams of this experiment.
  std::uint64_t stream_seed = 0;

  bool uses_score2() const { return window.empty(); }
  std::uint64_t stage_seed(std::string_view stage) const;
};

struct MasterConfig {
  std::uint64_t master_seed = 42;
  int n_patients = 10000;
  int n_physicians = 20;
  int min_panel_size = 90;
  int continuous_n_patients = 20000;
  int continuous_n_physicians = 50;
  double copula_rho = 0.8;
  double lognormal_mu = 1.846;
  double lognormal_sigma = 0.228;
};

/// Seed a spec from (master seed, id): cohort seed and stage root.
void assign_seeds(ExperimentSpec& spec, std::uint64_t master_seed);

/// The 94 conditions in fixed order: SCORE2 reference, 90 progressive
/// (pass 1 then pass 2, by width then position), copula and lognormal
/// sensitivity runs, continuous-heterogeneity run.
std::vector<ExperimentSpec> build_catalog(const MasterConfig& master);

struct GridConfig {
  std::vector<int> n_values{5000, 10000, 20000, 30000};
  std::vector<int> j_values{5, 10, 20, 50, 100};
  int replicates = 10;
};

/// SCORE2 replicates over a cohort-size x panel-count grid. The panel floor
/// is min(90, n / J) so that every cell is feasible.
std::vector<ExperimentSpec> build_grid(std::uint64_t master_seed, const GridConfig& grid);

nlohmann::json spec_to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const nlohmann::json& j);

}  // namespace ipv
