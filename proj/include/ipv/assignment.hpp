#pragma once

#include <Eigen/Core>
#include <vector>

namespace ipv {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Minimum-cost perfect assignment on a square cost matrix with finite
/// entries. Returns col_of_row: row i is assigned column col_of_row[i].
///
/// Shortest augmenting paths with dual potentials (Jonker-Volgenant family),
/// warm-started by column reduction. O(n^3) worst case.
std::vector<int> linear_sum_assignment(const RowMatrix& cost);

}  // namespace ipv
