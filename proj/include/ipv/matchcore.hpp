#pragma once

#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

#include "ipv/assignment.hpp"
#include "ipv/synthgen.hpp"

namespace ipv {

/// Cohort-wide z-scores and the robust (median / IQR) scaling used by LPA.
struct StandardizedCohort {
  Matrix z;
  Matrix z_robust;
  Vector column_means;
  Vector column_sds;
  Vector column_medians;
  Vector column_iqrs;
  /// Columns whose IQR is zero fall back to the z-score in z_robust.
  std::vector<bool> robust_fallback;
};

/// Constant columns standardize to zero.
StandardizedCohort standardize(const Matrix& x);
inline StandardizedCohort standardize(const Cohort& cohort) { return standardize(cohort.covariates); }

/// Rows of `m` at the given indices, in order.
Matrix select_rows(const Matrix& m, std::span<const int> rows);
template <typename T>
std::vector<T> select(const std::vector<T>& v, std::span<const int> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(v[static_cast<std::size_t>(i)]);
  return out;
}

/// Sample covariance (n - 1 denominator) of the columns of z.
Matrix covariance(const Matrix& z);
/// Moore-Penrose pseudo-inverse of a symmetric positive semi-definite matrix.
Matrix pseudo_inverse_psd(const Matrix& sym);

struct DistanceMatrix {
  int physician_id = -1;
  RowMatrix values;  // symmetric, non-negative, zero diagonal

  int size() const { return static_cast<int>(values.rows()); }
  double operator()(int i, int k) const { return values(i, k); }
};

/// Pairwise Euclidean distances between the rows of y.
DistanceMatrix pairwise_euclidean(const Matrix& y, int physician_id = -1);

struct EuclideanMetric {};
/// Mahalanobis with a fixed precision matrix (pseudo-inverse of a covariance).
struct MahalanobisMetric {
  Matrix precision;
};
/// ||diag(sqrt(w)) (z_i - z_k)||_2 for a non-negative weight vector.
struct WeightedMetric {
  std::vector<double> weights;
};
using Metric = std::variant<EuclideanMetric, MahalanobisMetric, WeightedMetric>;

/// Euclidean divides by sqrt(p).
DistanceMatrix distance_matrix(const Metric& metric, const Matrix& z_panel, int physician_id = -1);

/// Any factor L with L L^T = precision (rank-deficient precision allowed).
Matrix precision_factor(const Matrix& precision);

/// 25th percentile (linear interpolation) of the upper-triangular off-diagonal entries.
double caliper_value(const DistanceMatrix& d);

struct PairSet {
  int physician_id = -1;
  std::vector<std::pair<int, int>> pairs;  // panel-local indices, first < second
  double caliper = 0.0;
};

/// Hungarian assignment on D with an excluded diagonal, undirected
/// deduplication, caliper filter, then ascending-weight greedy selection
/// without replacement. Ties order by (smaller index, larger index).
PairSet pair_one_to_one(const DistanceMatrix& d);
/// Same result without copying: the diagonal is overwritten during the
/// assignment and restored to zero afterwards.
PairSet pair_one_to_one_inplace(DistanceMatrix& d);

/// Fraction of discordant pairs; nullopt for an empty pair set.
std::optional<double> discordance_from_pairs(const PairSet& pairs, std::span<const int> y_panel);

}  // namespace ipv
