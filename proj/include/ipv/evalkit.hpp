#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ipv/catalog.hpp"
#include "ipv/prescribe.hpp"

namespace ipv {

enum class Method {
  euclidean,
  mahalanobis,
  learned_weights,
  genetic_mahalanobis,
  rf_proximity,
  lpa_guided,
  mutual_info,
  glmm,
};

inline constexpr std::array<Method, 8> kAllMethods = {
    Method::euclidean,    Method::mahalanobis, Method::learned_weights, Method::genetic_mahalanobis,
    Method::rf_proximity, Method::lpa_guided,  Method::mutual_info,     Method::glmm};

/// The six matchers recomputed on the cohort-size / panel-count grid.
inline constexpr std::array<Method, 6> kGridMethods = {Method::euclidean,       Method::mahalanobis,
                                                        Method::learned_weights, Method::mutual_info,
                                                        Method::rf_proximity,    Method::lpa_guided};

std::string method_name(Method m);
std::string method_label(Method m);
Method method_from(const std::string& name);
/// "all" or a comma-separated list of method names.
std::vector<Method> parse_methods(const std::string& list);

/// False only for the GLMM overdispersion score.
bool is_rate_scale(Method m);
/// Euclidean, Mahalanobis and LPA-guided use covariates only.
bool is_unsupervised(Method m);
/// Learned Weights, RF Proximity and Mutual Information.
bool is_feature_weighted(Method m);

struct MethodScores {
  std::string experiment_id;
  Method method = Method::euclidean;
  std::vector<std::optional<double>> scores;  // per physician; nullopt = no estimate
  bool is_rate_scale = true;
};

struct DeltaResult {
  std::optional<double> value;
  int used = 0;
  int excluded = 0;
};

/// Mean of (estimate - truth) over physicians where both are defined.
DeltaResult mean_delta(std::span<const std::optional<double>> estimates,
                       std::span<const std::optional<double>> ground_truth);

struct RankResult {
  std::optional<double> rho;
  int used = 0;
  int excluded = 0;
};

/// Spearman correlation on average ranks over physicians where both are
/// defined; undefined with fewer than three or with a constant vector.
RankResult spearman_rank(std::span<const std::optional<double>> scores,
                         std::span<const std::optional<double>> reference);

struct Interval {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

using Statistic = std::function<double(std::span<const double>)>;

/// Percentile interval (2.5 / 97.5, linear interpolation) of the statistic
/// over B resamples with replacement; the point is the statistic on the sample.
Interval percentile_bootstrap(std::span<const double> values, const Statistic& statistic, int B = 2000,
                              std::uint64_t seed = 42);

double mean_statistic(std::span<const double> v);
double mean_abs_statistic(std::span<const double> v);
double median_statistic(std::span<const double> v);
/// Percentage of strictly positive entries.
double percent_positive_statistic(std::span<const double> v);

/// Per-method outcome of one experiment.
struct MethodResult {
  Method method = Method::euclidean;
  std::vector<std::optional<double>> scores;
  DeltaResult delta;      // rate-scale methods only
  RankResult rank;        // against the rank reference of the experiment
  RankResult rank_vs_gt;  // always against the empirical ground truth
  nlohmann::json diagnostics = nlohmann::json::object();
  std::optional<std::string> error;
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<PhysicianProfile> profiles;
  std::vector<int> panel_sizes;
  std::vector<int> eligible_counts;
  std::vector<std::optional<double>> ground_truth;
  std::vector<double> theoretical;    // D* = 2 p_high (1 - p_high)
  std::string rank_reference = "ground_truth";  // or "theoretical"
  double eligible_fraction = 0.0;
  std::vector<double> thresholds;     // conjunctive rules only
  nlohmann::json cohort_stats = nlohmann::json::object();
  std::vector<MethodResult> methods;
  std::optional<std::string> error;

  const MethodResult* find(Method m) const;
};

nlohmann::json report_to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);

// ------------------------------------------------------------ aggregates ---

struct BootstrapSettings {
  int B = 2000;
  std::uint64_t seed = 42;
};

struct GroupRow {
  std::string label;  // "ground_truth" or a method name
  std::array<std::optional<Interval>, 5> groups;
  std::optional<Interval> delta;  // physician-unit bootstrap of the per-physician deltas
};

/// Group means of the ground truth and of every rate-scale method in a
/// five-group experiment; resampling unit is the physician within a group.
std::vector<GroupRow> group_table(const ExperimentReport& r, const BootstrapSettings& bs = {});

struct AggregateRow {
  Method method = Method::euclidean;
  int n_experiments = 0;
  Interval mean_delta, mean_abs_delta, median_delta, percent_positive;
};

/// Experiment-unit aggregates over the supplied (progressive) reports.
/// Experiments without a defined delta for a method are skipped for it.
std::vector<AggregateRow> cross_experiment_summary(const std::vector<const ExperimentReport*>& reports,
                                                   const std::vector<Method>& methods,
                                                   const BootstrapSettings& bs = {});

/// 0: w = 1, 1: w = 2-3, 2: w = 4-6, 3: w = 7-9.
int window_bin(int width);
inline constexpr std::array<const char*, 4> kWindowBinLabels = {"w=1", "w=2-3", "w=4-6", "w=7-9"};

struct WindowRow {
  Method method = Method::euclidean;
  std::optional<double> score2;
  std::array<std::optional<Interval>, 4> bins;
  std::array<int, 4> counts{};
};

std::vector<WindowRow> window_table(const std::vector<const ExperimentReport*>& progressive,
                                    const ExperimentReport* score2, const std::vector<Method>& methods,
                                    const BootstrapSettings& bs = {});

struct PassRow {
  Method method = Method::euclidean;
  std::optional<Interval> pass1, pass2;
  int n1 = 0, n2 = 0;
};

std::vector<PassRow> pass_table(const std::vector<const ExperimentReport*>& progressive,
                                const std::vector<Method>& methods, const BootstrapSettings& bs = {});

}  // namespace ipv
