#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ipv/catalog.hpp"
#include "ipv/evalkit.hpp"
#include "ipv/synthgen.hpp"

namespace ipv {

/// Everything an estimator may see: covariates, outcomes and panel membership.
/// The eligibility rule and flags are deliberately absent.
struct EstimatorInput {
  const Matrix& x;
  std::span<const int> y;
  std::span<const int> physician_of;
  int n_physicians = 0;
  std::uint64_t stream_seed = 0;

  std::uint64_t stage_seed(std::string_view stage) const { return derive_seed(stream_seed, {stage}); }
};

/// Scores of one method plus its diagnostics.
struct EstimatorOutput {
  std::vector<std::optional<double>> scores;
  nlohmann::json diagnostics = nlohmann::json::object();
};

EstimatorOutput run_method(Method m, const EstimatorInput& input);

struct ExperimentRun {
  ExperimentReport report;
  std::map<std::string, double> seconds;  // per stage / method wall time
};

/// Cohort, eligibility, outcomes, ground truth, then each selected method.
/// Method failures are recorded in the report; setup failures set report.error.
ExperimentRun run_experiment(const ExperimentSpec& spec, const std::vector<Method>& methods);

/// Methods that apply to a spec: genetic matching is skipped for the
/// continuous-heterogeneity run.
std::vector<Method> methods_for(const ExperimentSpec& spec, const std::vector<Method>& requested);

/// n = 200, J = 2, continuous physician model.
ExperimentSpec smoke_spec(std::uint64_t master_seed);

/// "all", "score2", "progressive", "sensitivity_copula", "sensitivity_lognormal",
/// "continuous", "sensitivity" or "grid", or a comma-separated list of ids.
std::vector<ExperimentSpec> select_specs(const std::string& selection, const MasterConfig& master,
                                         const GridConfig& grid);

using ProgressFn = std::function<void(const ExperimentRun&, int done, int total)>;

/// Runs the specs with at most `jobs` worker threads. Results are returned in
/// input order and do not depend on the worker count.
std::vector<ExperimentRun> run_specs(const std::vector<ExperimentSpec>& specs, const std::vector<Method>& methods,
                                     int jobs, const ProgressFn& progress = {});

}  // namespace ipv
