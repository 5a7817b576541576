#include "ipv/matchcore.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

#include "ipv/stats.hpp"

namespace ipv {

StandardizedCohort standardize(const Matrix& x) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (n < 2) throw std::invalid_argument("standardize: need at least two rows");
  StandardizedCohort s;
  s.z.resize(n, p);
  s.z_robust.resize(n, p);
  s.column_means.resize(p);
  s.column_sds.resize(p);
  s.column_medians.resize(p);
  s.column_iqrs.resize(p);
  s.robust_fallback.assign(static_cast<std::size_t>(p), false);
  for (Eigen::Index c = 0; c < p; ++c) {
    std::span<const double> col(x.col(c).data(), static_cast<std::size_t>(n));
    const double mu = stats::mean(col);
    const double sd = stats::stddev(col);
    s.column_means(c) = mu;
    s.column_sds(c) = sd;
    if (sd > 0.0) {
      s.z.col(c) = (x.col(c).array() - mu) / sd;
    } else {
      s.z.col(c).setZero();
    }
    const double med = stats::median(col);
    const double iqr = stats::iqr(col);
    s.column_medians(c) = med;
    s.column_iqrs(c) = iqr;
    if (iqr > 0.0) {
      s.z_robust.col(c) = (x.col(c).array() - med) / iqr;
    } else {
      s.z_robust.col(c) = s.z.col(c);
      s.robust_fallback[static_cast<std::size_t>(c)] = true;
    }
  }
  return s;
}

Matrix select_rows(const Matrix& m, std::span<const int> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

Matrix covariance(const Matrix& z) {
  const Eigen::RowVectorXd mu = z.colwise().mean();
  const Matrix centered = z.rowwise() - mu;
  return (centered.transpose() * centered) / static_cast<double>(z.rows() - 1);
}

Matrix pseudo_inverse_psd(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Vector& lambda = eig.eigenvalues();
  const double max_abs = lambda.cwiseAbs().maxCoeff();
  const double tol = 1e-15 * static_cast<double>(sym.rows()) * max_abs;
  Vector inv = Vector::Zero(lambda.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k)
    if (std::abs(lambda(k)) > tol) inv(k) = 1.0 / lambda(k);
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix precision_factor(const Matrix& precision) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(precision);
  Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

DistanceMatrix pairwise_euclidean(const Matrix& y, int physician_id) {
  const auto n = static_cast<int>(y.rows());
  const auto p = static_cast<int>(y.cols());
  // Patients as contiguous columns.
  const Matrix yt = y.transpose();
  DistanceMatrix d;
  d.physician_id = physician_id;
  d.values.setZero(n, n);
  for (int i = 0; i < n; ++i) {
    const double* a = yt.data() + static_cast<std::ptrdiff_t>(i) * p;
    for (int k = i + 1; k < n; ++k) {
      const double* b = yt.data() + static_cast<std::ptrdiff_t>(k) * p;
      double ss = 0.0;
      for (int c = 0; c < p; ++c) {
        const double diff = a[c] - b[c];
        ss += diff * diff;
      }
      const double dist = std::sqrt(ss);
      d.values(i, k) = dist;
      d.values(k, i) = dist;
    }
  }
  return d;
}

DistanceMatrix distance_matrix(const Metric& metric, const Matrix& z_panel, int physician_id) {
  if (const auto* m = std::get_if<MahalanobisMetric>(&metric))
    return pairwise_euclidean(z_panel * precision_factor(m->precision), physician_id);
  if (const auto* w = std::get_if<WeightedMetric>(&metric)) {
    if (w->weights.size() != static_cast<std::size_t>(z_panel.cols()))
      throw std::invalid_argument("weighted distance: weight vector length differs from p");
    Vector root(z_panel.cols());
    for (Eigen::Index c = 0; c < root.size(); ++c) root(c) = std::sqrt(std::max(0.0, w->weights[static_cast<std::size_t>(c)]));
    return pairwise_euclidean(z_panel * root.asDiagonal(), physician_id);
  }
  return pairwise_euclidean(z_panel / std::sqrt(static_cast<double>(z_panel.cols())), physician_id);
}

double caliper_value(const DistanceMatrix& d) {
  const int n = d.size();
  if (n < 2) throw std::invalid_argument("caliper_value: need at least two patients");
  std::vector<double> upper;
  upper.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int k = i + 1; k < n; ++k) upper.push_back(d(i, k));
  return stats::quantile_inplace(upper, 0.25);
}

PairSet pair_one_to_one(const DistanceMatrix& d) {
  DistanceMatrix work = d;
  return pair_one_to_one_inplace(work);
}

PairSet pair_one_to_one_inplace(DistanceMatrix& d) {
  const int n = d.size();
  PairSet out;
  out.physician_id = d.physician_id;
  if (n < 2) return out;
  out.caliper = caliper_value(d);

  // The excluded diagonal is a finite sentinel no perfect assignment would prefer.
  const double max_entry = d.values.maxCoeff();
  const double sentinel = (static_cast<double>(n) + 1.0) * std::max(max_entry, 1.0) + 1.0;
  d.values.diagonal().setConstant(sentinel);
  const auto sigma = linear_sum_assignment(d.values);
  d.values.diagonal().setZero();

  std::vector<std::tuple<double, int, int>> candidates;
  candidates.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int a = std::min(i, sigma[static_cast<std::size_t>(i)]);
    const int b = std::max(i, sigma[static_cast<std::size_t>(i)]);
    const double w = d(a, b);
    if (a != b && std::isfinite(w) && w <= out.caliper) candidates.emplace_back(w, a, b);
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::vector<char> used(static_cast<std::size_t>(n), 0);
  for (const auto& [w, a, b] : candidates) {
    if (used[static_cast<std::size_t>(a)] || used[static_cast<std::size_t>(b)]) continue;
    out.pairs.emplace_back(a, b);
    used[static_cast<std::size_t>(a)] = used[static_cast<std::size_t>(b)] = 1;
  }
  return out;
}

std::optional<double> discordance_from_pairs(const PairSet& pairs, std::span<const int> y_panel) {
  if (pairs.pairs.empty()) return std::nullopt;
  int discordant = 0;
  for (const auto& [a, b] : pairs.pairs)
    discordant += (y_panel[static_cast<std::size_t>(a)] != y_panel[static_cast<std::size_t>(b)]) ? 1 : 0;
  return static_cast<double>(discordant) / static_cast<double>(pairs.pairs.size());
}

}  // namespace ipv
