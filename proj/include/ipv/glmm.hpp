#pragma once

#include <span>
#include <vector>

#include "ipv/synthgen.hpp"

namespace ipv {

struct GlmmPriors {
  double fixed_effect_sd = 3.0;  // intercept and slopes
  double log_scale_mean = 0.0;   // Gaussian prior on log sigma_u
  double log_scale_sd = 1.0;
};

struct GlmmConfig {
  GlmmPriors priors;
  int max_iter = 2000;
  double rel_tol = 1e-6;
  int history = 10;       // L-BFGS memory
  int quadrature = 20;    // Gauss-Hermite nodes
};

/// Mean-field Gaussian posterior of logit Pr(y_i = 1) = b0 + b' z_i + u_j(i),
/// u_j ~ N(0, sigma_u^2).
struct GlmmFit {
  double beta0 = 0.0;
  std::vector<double> beta;
  std::vector<double> u;
  double sigma_u = 0.0;            // exp(posterior mean of log sigma_u)
  double log_sigma_u_mean = 0.0;
  double log_sigma_u_sd = 0.0;
  std::vector<double> beta_sd;     // posterior SDs, intercept first
  std::vector<double> u_sd;
  std::vector<double> elbo_trace;  // one entry per accepted step
  int iterations = 0;
  bool converged = false;
};

/// Coordinate-wise Gaussian variational family optimised by L-BFGS with an
/// Armijo line search; expectations of log(1 + e^eta) by Gauss-Hermite
/// quadrature. Throws FitError on a non-finite ELBO.
GlmmFit fit_vb(const Matrix& z, std::span<const int> y, std::span<const int> physician_of, int n_physicians,
               const GlmmConfig& config = {});

/// Plug-in fitted probabilities clamped to [1e-9, 1 - 1e-9].
std::vector<double> fitted_probabilities(const GlmmFit& fit, const Matrix& z, std::span<const int> physician_of,
                                         int* clamped = nullptr);

struct OverdispersionScores {
  std::vector<double> od;         // per physician
  std::vector<double> residuals;  // per patient
  int clamped = 0;
};

/// Pearson residuals and their panel mean of squares.
OverdispersionScores overdispersion_scores(const GlmmFit& fit, const Matrix& z, std::span<const int> y,
                                           std::span<const int> physician_of, int n_physicians);

struct CalibrationBin {
  double lo = 0.0, hi = 0.0;
  double mean_predicted = 0.0;
  double observed = 0.0;
  int count = 0;
};

/// Equal-width bins over [0, 1]; empty bins are omitted.
std::vector<CalibrationBin> calibration_curve(std::span<const double> predicted, std::span<const int> y,
                                              int n_bins = 10);
std::vector<CalibrationBin> calibration_curve(const GlmmFit& fit, const Matrix& z, std::span<const int> y,
                                              std::span<const int> physician_of, int n_bins = 10);

/// Nodes and weights of the n-point physicists' Gauss-Hermite rule.
void gauss_hermite(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace ipv
