#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ipv/matchcore.hpp"
#include "ipv/synthgen.hpp"

namespace ipv {

// ---------------------------------------------------------------- forest ---

struct ForestConfig {
  int n_trees = 300;
  int max_depth = 8;
  int min_samples_leaf = 5;
  int features_per_split = 3;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  /// min_samples_leaf = max(5, floor(0.01 n)), features_per_split = ceil(sqrt(p)).
  static ForestConfig defaults_for(int n, int p, std::uint64_t seed);
  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double weight = 0.0;    // training (bootstrap) samples reaching the node
  double impurity = 0.0;  // Gini
  double value = 0.0;     // fraction of class 1
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  /// Index of the terminal node reached by a row of p features.
  template <typename Row>
  int apply(const Row& row) const {
    int k = 0;
    while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
      const auto& nd = nodes[static_cast<std::size_t>(k)];
      k = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return k;
  }
};

enum class FeatureSpace { standardized, raw };

struct ForestModel {
  std::vector<DecisionTree> trees;
  int n_features = 0;
  FeatureSpace feature_space = FeatureSpace::standardized;

  /// Mean leaf class-1 fraction over trees, per row.
  std::vector<double> predict_proba(const Matrix& features) const;
  /// leaves[t][i]: terminal node of row i in tree t.
  std::vector<std::vector<int>> apply(const Matrix& features) const;
};

/// Gini-split classification forest with bootstrap resampling per tree and
/// feature subsampling per split. Deterministic given config.seed; trees are
/// grown in parallel with per-tree derived seeds.
ForestModel train_forest(const Matrix& features, std::span<const int> y, const ForestConfig& config,
                         FeatureSpace space = FeatureSpace::standardized);

/// Mean over trees of per-tree normalised impurity decrease, renormalised to sum 1.
std::vector<double> gini_importances(const ForestModel& model);

/// 1 - fraction of trees in which two rows share a terminal node.
DistanceMatrix rf_dissimilarity(const ForestModel& model, const Matrix& panel_features, int physician_id = -1);

// ------------------------------------------------------ mutual information ---

/// Kraskov-style kNN estimate (continuous feature, discrete label) in nats,
/// clamped at zero.
double mi_continuous_discrete(std::span<const double> x, std::span<const int> y, int k);
/// Plug-in mutual information of two discrete variables in nats.
double mi_discrete(std::span<const double> x, std::span<const int> y);

/// w_l = I(z_l; y) / sum I. Columns with at most two distinct values use the
/// plug-in estimator; the others get a 1e-10-scale jitter (seeded) before the
/// kNN estimator to break ties. All-zero estimates fall back to uniform weights.
std::vector<double> mi_weights(const Matrix& z, std::span<const int> y, int k = 3, std::uint64_t seed = 0);

/// Normalise a non-negative vector to sum 1; uniform when the sum is zero.
std::vector<double> normalize_weights(std::vector<double> w);

}  // namespace ipv
