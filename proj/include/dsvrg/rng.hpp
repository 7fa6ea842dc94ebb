#pragma once

#include <cstdint>
#include <limits>

namespace dsvrg {

/// Algorithmic roles that draw randomness. Each role gets its own sub-stream of
/// a run seed so that, e.g., the SVRG sample stream is unaffected by how many
/// draws the partition step consumed.
enum class Stream : std::uint64_t {
  Partition = 1,
  Sequence = 2,
  Sampling = 3,
  Data = 4,
  Noise = 5,
  Features = 6,
  Plan = 7,
};

inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: the k-th output is mix64(key + k * golden), i.e.
/// the SplitMix64 output function applied to a counter. A stream is fully
/// determined by its key, and the key of sub-stream `s` of seed `x` is
/// mix64(mix64(x) ^ mix64(s * golden)). Sub-streams of sub-streams compose the
/// same way, so any (seed, role, index) path names a reproducible stream.
class CounterRng {
 public:
  using result_type = std::uint64_t;
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  explicit constexpr CounterRng(std::uint64_t key = 0) noexcept : key_(key) {}

  static constexpr CounterRng from_seed(std::uint64_t seed) noexcept { return CounterRng(mix64(seed)); }

  static constexpr CounterRng stream(std::uint64_t seed, Stream role) noexcept {
    return from_seed(seed).split(static_cast<std::uint64_t>(role));
  }

  constexpr CounterRng split(std::uint64_t id) const noexcept {
    return CounterRng(mix64(key_ ^ mix64(id * kGolden)));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept { return mix64(key_ + (++counter_) * kGolden); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n), unbiased (rejection on the top of the range).
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % n;
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace dsvrg
