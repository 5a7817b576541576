#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ipv/matchcore.hpp"
#include "ipv/synthgen.hpp"

namespace ipv {

struct DEConfig {
  double lower = 0.0;
  double upper = 10.0;
  int population_size = 135;
  int max_generations = 10;
  double mutation = 0.8;
  double crossover = 0.7;
  std::uint64_t seed = 0;

  int evaluation_budget() const { return population_size * (max_generations + 1); }
  void validate() const;
};

struct GeneticWeights {
  std::vector<double> w_hat;
  double achieved_loss = 0.0;
  int evaluations = 0;
  std::vector<double> loss_trace;  // best loss after the initial population and each generation
};

/// Nearest control of every treated row (y = 1) in the space z diag(sqrt(w / |w|_1)),
/// with replacement; equal distances resolve to the smaller control index.
/// Returns control row indices aligned with the treated rows in ascending order.
std::vector<int> nearest_controls(std::span<const double> w, const Matrix& z, std::span<const int> y);

/// Maximum absolute standardized mean difference between treated rows and
/// their matched controls. +inf for an all-zero weight vector.
double balance_loss(std::span<const double> w, const Matrix& z, std::span<const int> y);

/// rand/1/bin differential evolution over [lower, upper]^p. Member 0 of the
/// initial population is the all-ones vector; out-of-box coordinates of a
/// trial are redrawn uniformly; trials of a generation are scored in parallel.
GeneticWeights optimize_weights(const Matrix& z, std::span<const int> y, const DEConfig& config);

struct GeneticEstimate {
  std::vector<std::optional<double>> rates;  // per physician
  std::vector<int> kept;                     // patients passing the caliper
  std::vector<double> calipers;
};

/// Per-physician nearest-neighbour matching with replacement under the
/// Mahalanobis distance of z diag(sqrt(w_hat)), covariance estimated on the
/// full cohort. Patient i counts only if d(i, nn(i)) is within the caliper.
GeneticEstimate genetic_mahalanobis_estimate(const Matrix& z, std::span<const int> y,
                                             std::span<const int> physician_of, int n_physicians,
                                             std::span<const double> w_hat);

/// Panel-level rule behind genetic_mahalanobis_estimate, exposed for testing.
std::optional<double> nn_discordance_with_caliper(const DistanceMatrix& d, std::span<const int> y_panel,
                                                  int* kept = nullptr, double* caliper = nullptr);

}  // namespace ipv
