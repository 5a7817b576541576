#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <vector>

namespace ipv {

/// SplitMix64 finalizer. Used for seeding and for stream-id hashing.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Derive an independent stream seed from a master seed and a sequence of
/// labels, e.g. derive_seed(master, {"prog_p1_w3_s2", "cohort"}).
/// The mapping is a pure function of its arguments (FNV-1a over the labels,
/// folded through SplitMix64), so results do not depend on call order.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::string_view> labels);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// xoshiro256** generator with portable distribution helpers.
///
/// The standard library distributions are implementation-defined, so every
/// variate used by the harness is produced here to keep outputs bit-identical
/// across toolchains.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  result_type operator()() noexcept { return next(); }
  result_type next() noexcept;

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept;
  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }
  bool bernoulli(double p) noexcept { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace ipv
