#include "ipv/assignment.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace ipv {

std::vector<int> linear_sum_assignment(const RowMatrix& cost) {
  const auto n = static_cast<int>(cost.rows());
  if (cost.cols() != cost.rows()) throw std::invalid_argument("linear_sum_assignment: matrix must be square");
  if (n == 0) return {};
  if (!cost.allFinite()) throw std::invalid_argument("linear_sum_assignment: entries must be finite");

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n, 0.0), v(n, 0.0);
  std::vector<int> col_of_row(n, -1), row_of_col(n, -1);

  // Column reduction: v_j = min_i c_ij, tight edges assigned where the row is free.
  for (int j = n - 1; j >= 0; --j) {
    int best = 0;
    double best_val = cost(0, j);
    for (int i = 1; i < n; ++i) {
      if (cost(i, j) < best_val) {
        best_val = cost(i, j);
        best = i;
      }
    }
    v[j] = best_val;
    if (col_of_row[best] == -1) {
      col_of_row[best] = j;
      row_of_col[j] = best;
    }
  }

  std::vector<double> dist(n);
  std::vector<int> pred(n), remaining(n), scanned_rows;
  std::vector<char> col_scanned(n);
  scanned_rows.reserve(n);

  for (int start = 0; start < n; ++start) {
    if (col_of_row[start] != -1) continue;

    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(col_scanned.begin(), col_scanned.end(), 0);
    scanned_rows.clear();
    int n_remaining = n;
    for (int k = 0; k < n; ++k) remaining[k] = n - k - 1;

    double min_val = 0.0;
    int i = start;
    int sink = -1;
    while (sink == -1) {
      scanned_rows.push_back(i);
      const double* row = cost.data() + static_cast<std::ptrdiff_t>(i) * n;
      const double ui = u[i];
      int index = -1;
      double lowest = kInf;
      for (int k = 0; k < n_remaining; ++k) {
        const int j = remaining[k];
        const double r = min_val + row[j] - ui - v[j];
        if (r < dist[j]) {
          pred[j] = i;
          dist[j] = r;
        }
        if (dist[j] < lowest || (dist[j] == lowest && row_of_col[j] == -1)) {
          lowest = dist[j];
          index = k;
        }
      }
      min_val = lowest;
      if (!std::isfinite(min_val)) throw std::runtime_error("linear_sum_assignment: infeasible cost matrix");
      const int j = remaining[index];
      if (row_of_col[j] == -1) {
        sink = j;
      } else {
        i = row_of_col[j];
      }
      col_scanned[j] = 1;
      remaining[index] = remaining[--n_remaining];
    }

    // Dual update keeps every reduced cost non-negative and tight edges tight.
    u[start] += min_val;
    for (int r : scanned_rows)
      if (r != start) u[r] += min_val - dist[col_of_row[r]];
    for (int j = 0; j < n; ++j)
      if (col_scanned[j]) v[j] -= min_val - dist[j];

    int j = sink;
    while (true) {
      const int r = pred[j];
      row_of_col[j] = r;
      std::swap(col_of_row[r], j);
      if (r == start) break;
    }
  }
  return col_of_row;
}

}  // namespace ipv
