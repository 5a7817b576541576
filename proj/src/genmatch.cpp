#include "ipv/genmatch.hpp"

#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "ipv/errors.hpp"
#include "ipv/random.hpp"

namespace ipv {

void DEConfig::validate() const {
  if (!(lower < upper)) throw ConfigError("differential evolution: lower bound must be below upper bound");
  if (population_size < 4) throw ConfigError("differential evolution: population needs at least four members");
  if (max_generations < 0) throw ConfigError("differential evolution: negative generation count");
  if (mutation <= 0.0 || crossover < 0.0 || crossover > 1.0)
    throw ConfigError("differential evolution: mutation must be positive and crossover in [0, 1]");
}

namespace {

// Exact nearest neighbour over a fixed point set; ties go to the smaller id.
class KdTree {
 public:
  KdTree(std::vector<double> points, std::vector<int> ids, int dim)
      : dim_(dim), n_(static_cast<int>(ids.size())) {
    std::vector<int> perm(static_cast<std::size_t>(n_));
    std::iota(perm.begin(), perm.end(), 0);
    nodes_.reserve(static_cast<std::size_t>(2 * n_ / kLeaf + 2));
    build(points, perm, 0, n_);
    pts_.resize(points.size());
    ids_.resize(ids.size());
    for (int r = 0; r < n_; ++r) {
      const int src = perm[static_cast<std::size_t>(r)];
      std::copy_n(points.begin() + static_cast<std::ptrdiff_t>(src) * dim_, dim_,
                  pts_.begin() + static_cast<std::ptrdiff_t>(r) * dim_);
      ids_[static_cast<std::size_t>(r)] = ids[static_cast<std::size_t>(src)];
    }
  }

  int nearest(const double* q) const {
    double best = std::numeric_limits<double>::infinity();
    int best_id = std::numeric_limits<int>::max();
    search(0, q, best, best_id);
    return best_id;
  }

 private:
  static constexpr int kLeaf = 12;
  struct Node {
    int begin, end;
    int dim = -1;
    double split = 0.0;
    int left = -1, right = -1;
  };

  int build(const std::vector<double>& points, std::vector<int>& perm, int lo, int hi) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({lo, hi});
    if (hi - lo <= kLeaf) return id;
    int best_dim = 0;
    double best_spread = -1.0;
    for (int d = 0; d < dim_; ++d) {
      double mn = std::numeric_limits<double>::infinity(), mx = -mn;
      for (int r = lo; r < hi; ++r) {
        const double v = points[static_cast<std::size_t>(perm[static_cast<std::size_t>(r)]) * dim_ + d];
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      if (mx - mn > best_spread) {
        best_spread = mx - mn;
        best_dim = d;
      }
    }
    if (best_spread <= 0.0) return id;
    const int mid = (lo + hi) / 2;
    auto coord = [&](int p) { return points[static_cast<std::size_t>(p) * dim_ + best_dim]; };
    std::nth_element(perm.begin() + lo, perm.begin() + mid, perm.begin() + hi,
                     [&](int a, int b) { return coord(a) < coord(b); });
    const double split = coord(perm[static_cast<std::size_t>(mid)]);
    const int left = build(points, perm, lo, mid);
    const int right = build(points, perm, mid, hi);
    auto& nd = nodes_[static_cast<std::size_t>(id)];
    nd.dim = best_dim;
    nd.split = split;
    nd.left = left;
    nd.right = right;
    return id;
  }

  void search(int node, const double* q, double& best, int& best_id) const {
    const Node& nd = nodes_[static_cast<std::size_t>(node)];
    if (nd.dim < 0) {
      for (int r = nd.begin; r < nd.end; ++r) {
        const double* p = pts_.data() + static_cast<std::ptrdiff_t>(r) * dim_;
        double d2 = 0.0;
        for (int d = 0; d < dim_; ++d) {
          const double diff = q[d] - p[d];
          d2 += diff * diff;
        }
        const int id = ids_[static_cast<std::size_t>(r)];
        if (d2 < best || (d2 == best && id < best_id)) {
          best = d2;
          best_id = id;
        }
      }
      return;
    }
    const double diff = q[nd.dim] - nd.split;
    const int first = diff < 0.0 ? nd.left : nd.right;
    const int second = diff < 0.0 ? nd.right : nd.left;
    search(first, q, best, best_id);
    if (diff * diff <= best) search(second, q, best, best_id);
  }

  int dim_, n_;
  std::vector<Node> nodes_;
  std::vector<double> pts_;
  std::vector<int> ids_;
};

}  // namespace

std::vector<int> nearest_controls(std::span<const double> w, const Matrix& z, std::span<const int> y) {
  const int n = static_cast<int>(z.rows());
  const int p = static_cast<int>(z.cols());
  if (static_cast<int>(w.size()) != p) throw std::invalid_argument("nearest_controls: weight length differs from p");
  if (static_cast<int>(y.size()) != n) throw std::invalid_argument("nearest_controls: y length differs from rows");
  double total = 0.0;
  for (double v : w) total += std::abs(v);
  if (!(total > 0.0)) throw std::invalid_argument("nearest_controls: all-zero weights");
  std::vector<double> scale(static_cast<std::size_t>(p));
  for (int c = 0; c < p; ++c) scale[static_cast<std::size_t>(c)] = std::sqrt(std::abs(w[static_cast<std::size_t>(c)]) / total);

  std::vector<double> control_pts;
  std::vector<int> control_ids;
  for (int i = 0; i < n; ++i) {
    if (y[static_cast<std::size_t>(i)] != 0) continue;
    control_ids.push_back(i);
    for (int c = 0; c < p; ++c) control_pts.push_back(z(i, c) * scale[static_cast<std::size_t>(c)]);
  }
  if (control_ids.empty()) throw std::invalid_argument("nearest_controls: no control rows");
  const KdTree tree(std::move(control_pts), std::move(control_ids), p);

  std::vector<int> matched;
  std::vector<double> q(static_cast<std::size_t>(p));
  for (int i = 0; i < n; ++i) {
    if (y[static_cast<std::size_t>(i)] == 0) continue;
    for (int c = 0; c < p; ++c) q[static_cast<std::size_t>(c)] = z(i, c) * scale[static_cast<std::size_t>(c)];
    matched.push_back(tree.nearest(q.data()));
  }
  return matched;
}

double balance_loss(std::span<const double> w, const Matrix& z, std::span<const int> y) {
  double total = 0.0;
  for (double v : w) total += std::abs(v);
  if (!(total > 0.0)) return std::numeric_limits<double>::infinity();
  const auto matched = nearest_controls(w, z, y);
  if (matched.empty()) throw std::invalid_argument("balance_loss: no treated rows");
  const auto p = z.cols();
  Vector treated_sum = Vector::Zero(p), matched_sum = Vector::Zero(p);
  std::size_t t = 0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (y[static_cast<std::size_t>(i)] == 0) continue;
    treated_sum += z.row(i).transpose();
    matched_sum += z.row(matched[t++]).transpose();
  }
  const double m = static_cast<double>(matched.size());
  return ((treated_sum - matched_sum) / m).cwiseAbs().maxCoeff();
}

GeneticWeights optimize_weights(const Matrix& z, std::span<const int> y, const DEConfig& config) {
  config.validate();
  const int p = static_cast<int>(z.cols());
  const int np = config.population_size;
  Rng rng(config.seed);

  std::vector<std::vector<double>> pop(static_cast<std::size_t>(np), std::vector<double>(static_cast<std::size_t>(p)));
  std::fill(pop[0].begin(), pop[0].end(), 1.0);
  for (int i = 1; i < np; ++i)
    for (double& v : pop[static_cast<std::size_t>(i)]) v = rng.uniform(config.lower, config.upper);

  auto score_all = [&](const std::vector<std::vector<double>>& members) {
    std::vector<double> f(members.size());
    tbb::parallel_for(std::size_t{0}, members.size(), [&](std::size_t i) { f[i] = balance_loss(members[i], z, y); });
    return f;
  };

  GeneticWeights out;
  std::vector<double> fitness = score_all(pop);
  out.evaluations = np;
  auto best_index = [&] {
    return static_cast<int>(std::min_element(fitness.begin(), fitness.end()) - fitness.begin());
  };
  out.loss_trace.push_back(fitness[static_cast<std::size_t>(best_index())]);

  std::vector<std::vector<double>> trials(pop.size(), std::vector<double>(static_cast<std::size_t>(p)));
  for (int g = 0; g < config.max_generations; ++g) {
    for (int i = 0; i < np; ++i) {
      int r1, r2, r3;
      do r1 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(np)));
      while (r1 == i);
      do r2 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(np)));
      while (r2 == i || r2 == r1);
      do r3 = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(np)));
      while (r3 == i || r3 == r1 || r3 == r2);
      const int forced = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(p)));
      auto& trial = trials[static_cast<std::size_t>(i)];
      for (int c = 0; c < p; ++c) {
        const auto uc = static_cast<std::size_t>(c);
        if (c == forced || rng.uniform() < config.crossover) {
          double v = pop[static_cast<std::size_t>(r1)][uc] +
                     config.mutation * (pop[static_cast<std::size_t>(r2)][uc] - pop[static_cast<std::size_t>(r3)][uc]);
          if (v < config.lower || v > config.upper) v = rng.uniform(config.lower, config.upper);
          trial[uc] = v;
        } else {
          trial[uc] = pop[static_cast<std::size_t>(i)][uc];
        }
      }
    }
    const auto trial_fitness = score_all(trials);
    out.evaluations += np;
    for (int i = 0; i < np; ++i) {
      if (trial_fitness[static_cast<std::size_t>(i)] <= fitness[static_cast<std::size_t>(i)]) {
        pop[static_cast<std::size_t>(i)] = trials[static_cast<std::size_t>(i)];
        fitness[static_cast<std::size_t>(i)] = trial_fitness[static_cast<std::size_t>(i)];
      }
    }
    out.loss_trace.push_back(fitness[static_cast<std::size_t>(best_index())]);
  }
  const int b = best_index();
  out.w_hat = pop[static_cast<std::size_t>(b)];
  out.achieved_loss = fitness[static_cast<std::size_t>(b)];
  return out;
}

std::optional<double> nn_discordance_with_caliper(const DistanceMatrix& d, std::span<const int> y_panel, int* kept,
                                                  double* caliper) {
  const int n = d.size();
  if (kept) *kept = 0;
  if (n < 2) return std::nullopt;
  const double c = caliper_value(d);
  if (caliper) *caliper = c;
  int used = 0, discordant = 0;
  for (int i = 0; i < n; ++i) {
    int nn = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int k = 0; k < n; ++k) {
      if (k == i) continue;
      if (d(i, k) < best) {
        best = d(i, k);
        nn = k;
      }
    }
    if (nn < 0 || best > c) continue;
    ++used;
    discordant += y_panel[static_cast<std::size_t>(i)] != y_panel[static_cast<std::size_t>(nn)] ? 1 : 0;
  }
  if (kept) *kept = used;
  if (used == 0) return std::nullopt;
  return static_cast<double>(discordant) / used;
}

GeneticEstimate genetic_mahalanobis_estimate(const Matrix& z, std::span<const int> y,
                                             std::span<const int> physician_of, int n_physicians,
                                             std::span<const double> w_hat) {
  const auto p = z.cols();
  if (static_cast<Eigen::Index>(w_hat.size()) != p)
    throw std::invalid_argument("genetic_mahalanobis_estimate: weight length differs from p");
  Vector root(p);
  for (Eigen::Index c = 0; c < p; ++c) root(c) = std::sqrt(std::max(0.0, w_hat[static_cast<std::size_t>(c)]));
  const Matrix weighted = z * root.asDiagonal();
  const Matrix whitened = weighted * precision_factor(pseudo_inverse_psd(covariance(weighted)));

  std::vector<std::vector<int>> panels(static_cast<std::size_t>(n_physicians));
  for (std::size_t i = 0; i < physician_of.size(); ++i)
    panels[static_cast<std::size_t>(physician_of[i])].push_back(static_cast<int>(i));

  GeneticEstimate out;
  out.rates.resize(panels.size());
  out.kept.assign(panels.size(), 0);
  out.calipers.assign(panels.size(), 0.0);
  tbb::parallel_for(std::size_t{0}, panels.size(), [&](std::size_t j) {
    const auto& idx = panels[j];
    if (idx.size() < 2) return;
    const auto d = pairwise_euclidean(select_rows(whitened, idx), static_cast<int>(j));
    std::vector<int> yp;
    yp.reserve(idx.size());
    for (int i : idx) yp.push_back(y[static_cast<std::size_t>(i)]);
    out.rates[j] = nn_discordance_with_caliper(d, yp, &out.kept[j], &out.calipers[j]);
  });
  return out;
}

}  // namespace ipv
