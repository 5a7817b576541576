#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "ipv/random.hpp"
#include "ipv/weights.hpp"

namespace ipv {

namespace {

constexpr double kEulerGamma = 0.57721566490153286061;

// psi(m) for integer m >= 1 through the harmonic numbers.
class IntDigamma {
 public:
  explicit IntDigamma(int max_arg) : table_(static_cast<std::size_t>(max_arg) + 1) {
    double h = 0.0;
    table_[0] = std::numeric_limits<double>::quiet_NaN();
    for (int m = 1; m <= max_arg; ++m) {
      table_[static_cast<std::size_t>(m)] = -kEulerGamma + h;
      h += 1.0 / m;
    }
  }
  double operator()(int m) const { return table_[static_cast<std::size_t>(m)]; }

 private:
  std::vector<double> table_;
};

// Distance from sorted[pos] to its k-th nearest other element.
double kth_neighbour_distance(const std::vector<double>& sorted, int pos, int k) {
  int lo = pos - 1, hi = pos + 1;
  const int n = static_cast<int>(sorted.size());
  double d = 0.0;
  for (int taken = 0; taken < k; ++taken) {
    const double dl = lo >= 0 ? sorted[static_cast<std::size_t>(pos)] - sorted[static_cast<std::size_t>(lo)]
                              : std::numeric_limits<double>::infinity();
    const double dh = hi < n ? sorted[static_cast<std::size_t>(hi)] - sorted[static_cast<std::size_t>(pos)]
                             : std::numeric_limits<double>::infinity();
    if (dl <= dh) {
      d = dl;
      --lo;
    } else {
      d = dh;
      ++hi;
    }
  }
  return d;
}

// Number of elements (self included) within distance r of value v.
int count_within(const std::vector<double>& sorted, double v, double r) {
  const auto first = std::partition_point(sorted.begin(), sorted.end(), [&](double s) { return s < v && v - s > r; });
  const auto last = std::partition_point(first, sorted.end(), [&](double s) { return s <= v || s - v <= r; });
  return static_cast<int>(last - first);
}

}  // namespace

double mi_continuous_discrete(std::span<const double> x, std::span<const int> y, int k) {
  if (x.size() != y.size()) throw std::invalid_argument("mi_continuous_discrete: length mismatch");
  if (k < 1) throw std::invalid_argument("mi_continuous_discrete: k must be positive");
  std::map<int, std::vector<int>> by_label;
  for (std::size_t i = 0; i < y.size(); ++i) by_label[y[i]].push_back(static_cast<int>(i));

  std::vector<double> kept_values;
  std::vector<double> radius;
  std::vector<int> k_used, label_count;
  for (const auto& [label, idx] : by_label) {
    const int count = static_cast<int>(idx.size());
    if (count < 2) continue;
    const int kc = std::min(k, count - 1);
    std::vector<double> sorted;
    sorted.reserve(idx.size());
    for (int i : idx) sorted.push_back(x[static_cast<std::size_t>(i)]);
    std::sort(sorted.begin(), sorted.end());
    for (int pos = 0; pos < count; ++pos) {
      kept_values.push_back(sorted[static_cast<std::size_t>(pos)]);
      radius.push_back(std::nextafter(kth_neighbour_distance(sorted, pos, kc), 0.0));
      k_used.push_back(kc);
      label_count.push_back(count);
    }
  }
  const int n = static_cast<int>(kept_values.size());
  if (n < 2) return 0.0;
  std::vector<double> all = kept_values;
  std::sort(all.begin(), all.end());
  const IntDigamma psi(n);

  double mean_k = 0.0, mean_label = 0.0, mean_m = 0.0;
  for (int i = 0; i < n; ++i) {
    const int m = count_within(all, kept_values[static_cast<std::size_t>(i)], radius[static_cast<std::size_t>(i)]);
    mean_k += psi(k_used[static_cast<std::size_t>(i)]);
    mean_label += psi(label_count[static_cast<std::size_t>(i)]);
    mean_m += psi(m);
  }
  const double mi = psi(n) + (mean_k - mean_label - mean_m) / n;
  return std::max(0.0, mi);
}

double mi_discrete(std::span<const double> x, std::span<const int> y) {
  if (x.size() != y.size()) throw std::invalid_argument("mi_discrete: length mismatch");
  const double n = static_cast<double>(x.size());
  if (x.empty()) return 0.0;
  std::map<std::pair<double, int>, int> joint;
  std::map<double, int> px;
  std::map<int, int> py;
  for (std::size_t i = 0; i < x.size(); ++i) {
    ++joint[{x[i], y[i]}];
    ++px[x[i]];
    ++py[y[i]];
  }
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double pxy = c / n;
    mi += pxy * std::log(pxy / ((px[key.first] / n) * (py[key.second] / n)));
  }
  return std::max(0.0, mi);
}

std::vector<double> mi_weights(const Matrix& z, std::span<const int> y, int k, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(z.rows());
  const auto p = static_cast<int>(z.cols());
  if (y.size() != n) throw std::invalid_argument("mi_weights: y length differs from rows");
  if (static_cast<int>(n) < k + 1) throw std::invalid_argument("mi_weights: need at least k + 1 rows");
  std::vector<double> mi(static_cast<std::size_t>(p), 0.0);
  for (int c = 0; c < p; ++c) {
    std::vector<double> col(z.col(c).data(), z.col(c).data() + n);
    std::vector<double> distinct = col;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() <= 2) {
      mi[static_cast<std::size_t>(c)] = mi_discrete(col, y);
      continue;
    }
    double mean_abs = 0.0;
    for (double v : col) mean_abs += std::abs(v);
    mean_abs /= static_cast<double>(n);
    const double scale = 1e-10 * std::max(1.0, mean_abs);
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    for (double& v : col) v += scale * rng.normal();
    mi[static_cast<std::size_t>(c)] = mi_continuous_discrete(col, y, k);
  }
  return normalize_weights(std::move(mi));
}

}  // namespace ipv
