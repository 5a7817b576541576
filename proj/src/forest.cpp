#include <tbb/parallel_for.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "ipv/errors.hpp"
#include "ipv/random.hpp"
#include "ipv/weights.hpp"

namespace ipv {

ForestConfig ForestConfig::defaults_for(int n, int p, std::uint64_t seed) {
  ForestConfig c;
  c.min_samples_leaf = std::max(5, static_cast<int>(std::floor(0.01 * n)));
  c.features_per_split = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p)))));
  c.seed = seed;
  return c;
}

void ForestConfig::validate() const {
  if (n_trees < 1 || n_trees > 65535) throw ConfigError("forest: n_trees must lie in [1, 65535]");
  if (max_depth < 1) throw ConfigError("forest: max_depth must be at least 1");
  if (min_samples_leaf < 1) throw ConfigError("forest: min_samples_leaf must be at least 1");
  if (features_per_split < 1) throw ConfigError("forest: features_per_split must be at least 1");
}

namespace {

double gini(double w, double w1) {
  if (w <= 0.0) return 0.0;
  const double q = w1 / w;
  return 2.0 * q * (1.0 - q);
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const int> y, const ForestConfig& cfg,
              const std::vector<std::vector<int>>& order, std::uint64_t seed)
      : x_(x), y_(y), cfg_(cfg), rng_(seed), n_(static_cast<int>(x.rows())), p_(static_cast<int>(x.cols())) {
    weight_.assign(static_cast<std::size_t>(n_), 0.0);
    if (cfg.bootstrap) {
      for (int s = 0; s < n_; ++s) weight_[rng_.uniform_index(static_cast<std::uint64_t>(n_))] += 1.0;
    } else {
      std::fill(weight_.begin(), weight_.end(), 1.0);
    }
    lists_.resize(static_cast<std::size_t>(p_));
    for (int f = 0; f < p_; ++f) {
      auto& l = lists_[static_cast<std::size_t>(f)];
      l.reserve(static_cast<std::size_t>(n_));
      for (int i : order[static_cast<std::size_t>(f)])
        if (weight_[static_cast<std::size_t>(i)] > 0.0) l.push_back(i);
    }
    buffer_.resize(lists_[0].size());
    goes_left_.assign(static_cast<std::size_t>(n_), 0);
    perm_.resize(static_cast<std::size_t>(p_));
  }

  DecisionTree build() {
    tree_.nodes.reserve(2u << std::min(cfg_.max_depth, 12));
    grow(0, static_cast<int>(lists_[0].size()), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    bool found = false;
    double proxy = -std::numeric_limits<double>::infinity();
    int feature = -1;
    int last_left = -1;  // position in the feature list of the last left sample
    double threshold = 0.0;
  };

  int grow(int b, int e, int depth) {
    double w = 0.0, w1 = 0.0;
    for (int t = b; t < e; ++t) {
      const int i = lists_[0][static_cast<std::size_t>(t)];
      w += weight_[static_cast<std::size_t>(i)];
      w1 += weight_[static_cast<std::size_t>(i)] * y_[static_cast<std::size_t>(i)];
    }
    const int id = static_cast<int>(tree_.nodes.size());
    TreeNode node;
    node.weight = w;
    node.impurity = gini(w, w1);
    node.value = w > 0.0 ? w1 / w : 0.0;
    tree_.nodes.push_back(node);

    if (depth >= cfg_.max_depth || w < 2.0 * cfg_.min_samples_leaf || node.impurity <= 0.0) return id;
    const Split s = find_split(b, e, w, w1);
    if (!s.found) return id;

    const auto& chosen = lists_[static_cast<std::size_t>(s.feature)];
    for (int t = b; t < e; ++t) goes_left_[static_cast<std::size_t>(chosen[static_cast<std::size_t>(t)])] = t <= s.last_left;
    const int mid = s.last_left + 1;
    for (int f = 0; f < p_; ++f) {
      if (f == s.feature) continue;
      auto& l = lists_[static_cast<std::size_t>(f)];
      int lo = b, hi = 0;
      for (int t = b; t < e; ++t) {
        const int i = l[static_cast<std::size_t>(t)];
        if (goes_left_[static_cast<std::size_t>(i)]) {
          l[static_cast<std::size_t>(lo++)] = i;
        } else {
          buffer_[static_cast<std::size_t>(hi++)] = i;
        }
      }
      std::copy(buffer_.begin(), buffer_.begin() + hi, l.begin() + lo);
    }

    tree_.nodes[static_cast<std::size_t>(id)].feature = s.feature;
    tree_.nodes[static_cast<std::size_t>(id)].threshold = s.threshold;
    const int left = grow(b, mid, depth + 1);
    const int right = grow(mid, e, depth + 1);
    tree_.nodes[static_cast<std::size_t>(id)].left = left;
    tree_.nodes[static_cast<std::size_t>(id)].right = right;
    return id;
  }

  Split find_split(int b, int e, double w, double w1) {
    Split best;
    std::iota(perm_.begin(), perm_.end(), 0);
    const double min_leaf = cfg_.min_samples_leaf;
    int evaluated = 0;
    for (int k = 0; k < p_ && evaluated < cfg_.features_per_split; ++k) {
      const int pick = k + static_cast<int>(rng_.uniform_index(static_cast<std::uint64_t>(p_ - k)));
      std::swap(perm_[static_cast<std::size_t>(k)], perm_[static_cast<std::size_t>(pick)]);
      const int f = perm_[static_cast<std::size_t>(k)];
      const auto& l = lists_[static_cast<std::size_t>(f)];
      if (x_(l[static_cast<std::size_t>(b)], f) == x_(l[static_cast<std::size_t>(e - 1)], f)) continue;
      ++evaluated;

      double wl = 0.0, wl1 = 0.0;
      for (int t = b; t < e - 1; ++t) {
        const int i = l[static_cast<std::size_t>(t)];
        wl += weight_[static_cast<std::size_t>(i)];
        wl1 += weight_[static_cast<std::size_t>(i)] * y_[static_cast<std::size_t>(i)];
        const double xa = x_(i, f);
        const double xb = x_(l[static_cast<std::size_t>(t + 1)], f);
        if (xb == xa) continue;
        const double wr = w - wl;
        if (wl < min_leaf || wr < min_leaf) continue;
        const double wr1 = w1 - wl1;
        const double wl0 = wl - wl1, wr0 = wr - wr1;
        const double proxy = (wl1 * wl1 + wl0 * wl0) / wl + (wr1 * wr1 + wr0 * wr0) / wr;
        double thr = 0.5 * (xa + xb);
        if (!(thr < xb)) thr = xa;
        const bool better = proxy > best.proxy || (proxy == best.proxy && (f < best.feature ||
                                                                           (f == best.feature && thr < best.threshold)));
        if (better) {
          best.found = true;
          best.proxy = proxy;
          best.feature = f;
          best.last_left = t;
          best.threshold = thr;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const int> y_;
  const ForestConfig& cfg_;
  Rng rng_;
  int n_, p_;
  std::vector<double> weight_;
  std::vector<std::vector<int>> lists_;
  std::vector<int> buffer_;
  std::vector<char> goes_left_;
  std::vector<int> perm_;
  DecisionTree tree_;
};

}  // namespace

ForestModel train_forest(const Matrix& features, std::span<const int> y, const ForestConfig& config,
                         FeatureSpace space) {
  config.validate();
  const int n = static_cast<int>(features.rows());
  const int p = static_cast<int>(features.cols());
  if (static_cast<int>(y.size()) != n) throw std::invalid_argument("train_forest: y length differs from rows");
  if (n < 2 * config.min_samples_leaf) throw ConfigError("train_forest: fewer than 2 * min_samples_leaf rows");
  const auto ones = std::count(y.begin(), y.end(), 1);
  if (ones == 0 || ones == n) throw FitError("train_forest: y has a single class");

  std::vector<std::vector<int>> order(static_cast<std::size_t>(p));
  tbb::parallel_for(0, p, [&](int f) {
    auto& o = order[static_cast<std::size_t>(f)];
    o.resize(static_cast<std::size_t>(n));
    std::iota(o.begin(), o.end(), 0);
    std::stable_sort(o.begin(), o.end(), [&](int a, int b) { return features(a, f) < features(b, f); });
  });

  ForestModel model;
  model.n_features = p;
  model.feature_space = space;
  model.trees.resize(static_cast<std::size_t>(config.n_trees));
  tbb::parallel_for(0, config.n_trees, [&](int t) {
    TreeBuilder builder(features, y, config, order, derive_seed(config.seed, static_cast<std::uint64_t>(t)));
    model.trees[static_cast<std::size_t>(t)] = builder.build();
  });
  return model;
}

std::vector<std::vector<int>> ForestModel::apply(const Matrix& features) const {
  const auto n = static_cast<int>(features.rows());
  std::vector<std::vector<int>> leaves(trees.size(), std::vector<int>(static_cast<std::size_t>(n)));
  const Matrix xt = features.transpose();
  tbb::parallel_for(std::size_t{0}, trees.size(), [&](std::size_t t) {
    for (int i = 0; i < n; ++i) leaves[t][static_cast<std::size_t>(i)] = trees[t].apply(xt.col(i).data());
  });
  return leaves;
}

std::vector<double> ForestModel::predict_proba(const Matrix& features) const {
  const auto leaves = apply(features);
  std::vector<double> out(static_cast<std::size_t>(features.rows()), 0.0);
  for (std::size_t t = 0; t < trees.size(); ++t)
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] += trees[t].nodes[static_cast<std::size_t>(leaves[t][i])].value;
  for (double& v : out) v /= static_cast<double>(trees.size());
  return out;
}

std::vector<double> normalize_weights(std::vector<double> w) {
  double total = 0.0;
  for (double& v : w) {
    v = std::max(0.0, v);
    total += v;
  }
  if (total > 0.0) {
    for (double& v : w) v /= total;
  } else if (!w.empty()) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
  }
  return w;
}

std::vector<double> gini_importances(const ForestModel& model) {
  const auto p = static_cast<std::size_t>(model.n_features);
  std::vector<double> sum(p, 0.0);
  for (const auto& tree : model.trees) {
    if (tree.nodes.size() <= 1) continue;
    std::vector<double> imp(p, 0.0);
    for (const auto& nd : tree.nodes) {
      if (nd.feature < 0) continue;
      const auto& l = tree.nodes[static_cast<std::size_t>(nd.left)];
      const auto& r = tree.nodes[static_cast<std::size_t>(nd.right)];
      imp[static_cast<std::size_t>(nd.feature)] +=
          nd.weight * nd.impurity - l.weight * l.impurity - r.weight * r.impurity;
    }
    imp = normalize_weights(std::move(imp));
    for (std::size_t f = 0; f < p; ++f) sum[f] += imp[f];
  }
  return normalize_weights(std::move(sum));
}

DistanceMatrix rf_dissimilarity(const ForestModel& model, const Matrix& panel_features, int physician_id) {
  const int n = static_cast<int>(panel_features.rows());
  const auto leaves = model.apply(panel_features);
  std::vector<std::uint16_t> shared(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
  std::vector<int> bucket_start, members(static_cast<std::size_t>(n));
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const auto& leaf = leaves[t];
    // Counting sort of rows by terminal node keeps each bucket in ascending row order.
    bucket_start.assign(model.trees[t].nodes.size() + 1, 0);
    for (int i = 0; i < n; ++i) ++bucket_start[static_cast<std::size_t>(leaf[static_cast<std::size_t>(i)]) + 1];
    std::partial_sum(bucket_start.begin(), bucket_start.end(), bucket_start.begin());
    std::vector<int> fill(bucket_start.begin(), bucket_start.end() - 1);
    for (int i = 0; i < n; ++i) members[static_cast<std::size_t>(fill[static_cast<std::size_t>(leaf[static_cast<std::size_t>(i)])]++)] = i;
    for (std::size_t bkt = 0; bkt + 1 < bucket_start.size(); ++bkt) {
      const int lo = bucket_start[bkt], hi = bucket_start[bkt + 1];
      for (int a = lo; a < hi; ++a) {
        std::uint16_t* row = shared.data() + static_cast<std::size_t>(members[static_cast<std::size_t>(a)]) * n;
        for (int c = a + 1; c < hi; ++c) ++row[members[static_cast<std::size_t>(c)]];
      }
    }
  }
  DistanceMatrix d;
  d.physician_id = physician_id;
  d.values.setZero(n, n);
  const double n_trees = static_cast<double>(model.trees.size());
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      const double v = 1.0 - shared[static_cast<std::size_t>(i) * n + k] / n_trees;
      d.values(i, k) = v;
      d.values(k, i) = v;
    }
  }
  return d;
}

}  // namespace ipv
