#pragma once

// Counter-based random streams. Every consumer draws from its own stream,
// keyed by (seed, purpose), so e.g. the sample set does not change when the
// factor draws do.

#include <cstdint>
#include <limits>

namespace rram {

enum class Stream : std::uint64_t {
  kSampling = 1,
  kLeftFactor = 2,
  kRightFactor = 3,
  kInitialPoint = 4,
  kSplit = 5,
  kLanczosStart = 6,
};

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// SplitMix64 in counter mode: the i-th output is mix(key + (i + 1) * golden),
/// with key derived from (seed, stream). Satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, Stream stream)
      : key_(splitmix64_mix(seed ^ splitmix64_mix(static_cast<std::uint64_t>(stream) *
                                                  0x9e3779b97f4a7c15ULL))) {}

  result_type operator()() {
    ++counter_;
    return splitmix64_mix(key_ + counter_ * 0x9e3779b97f4a7c15ULL);
  }

  /// Number of values drawn so far.
  std::uint64_t counter() const { return counter_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace rram
