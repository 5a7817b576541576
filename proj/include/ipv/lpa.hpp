#pragma once

#include <cstdint>
#include <vector>

#include "ipv/matchcore.hpp"
#include "ipv/synthgen.hpp"

namespace ipv {

struct GmmConfig {
  int k_min = 2;
  int k_max = 10;
  int n_init = 10;
  int max_iter = 200;
  double tol = 1e-4;  // relative log-likelihood change
  double reg = 1e-6;  // added to every covariance diagonal
  std::uint64_t seed = 0;

  void validate() const;
};

struct GmmModel {
  int K = 0;
  Matrix means;                      // K x p
  std::vector<Matrix> covariances;   // K of p x p
  Vector weights;                    // K, sums to 1
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  double bic = 0.0;

  /// K p + K p (p + 1) / 2 + K - 1.
  int n_parameters() const;
};

/// One EM run from k-means++ seeding. `ll_trace` receives the log-likelihood
/// of every E-step when given.
GmmModel fit_gmm(const Matrix& x, int K, std::uint64_t seed, const GmmConfig& config,
                 std::vector<double>* ll_trace = nullptr);

/// Posterior component memberships (n x K), rows summing to 1.
Matrix gmm_responsibilities(const GmmModel& model, const Matrix& x);
/// Total log-likelihood of x under the model.
double gmm_log_likelihood(const GmmModel& model, const Matrix& x);

struct GmmCandidate {
  int K = 0;
  bool converged = false;
  double bic = 0.0;
  double log_likelihood = 0.0;
  int iterations = 0;
};

struct GmmSelection {
  GmmModel model;
  Matrix memberships;
  std::vector<GmmCandidate> candidates;  // best init per K, ascending K
  bool fallback = false;                 // no candidate converged
};

/// Best of n_init runs per K, then the converged candidate with the lowest
/// BIC; K = k_min when none converged.
GmmSelection fit_gmm_bic(const Matrix& x, const GmmConfig& config);

/// alpha d_lat / max d_lat + (1 - alpha) d_cli / max d_cli on one panel. A
/// term whose panel maximum is zero contributes nothing; `degenerate` reports it.
DistanceMatrix hybrid_distance(const Matrix& memberships_panel, const Matrix& robust_panel, double alpha = 0.5,
                               int physician_id = -1, bool* degenerate = nullptr);

}  // namespace ipv
