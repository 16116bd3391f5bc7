#pragma once

// Counter-based random streams.
//
// Every random quantity in the library is drawn from a CounterRng. A stream
// is identified by a 64-bit key; its i-th output (i = 0, 1, ...) is
//
//     out_i = mix64(key + (i + 1) * kGolden)
//
// which is exactly the SplitMix64 sequence started at state `key`. Child
// streams are derived with
//
//     derive_key(seed, tag, index) =
//         mix64(mix64(mix64(seed + kGolden) ^ (tag + kGolden)) ^ (index + kGolden))
//
// so the same (seed, tag, index) triple yields the same stream in any language
// that reproduces mix64. Doubles are formed from the top 53 bits.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace twincher {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
  std::uint64_t k = mix64(seed + kGolden);
  k = mix64(k ^ (tag + kGolden));
  return mix64(k ^ (index + kGolden));
}

/// Stream tags. Values are part of the reproducibility contract; never renumber.
namespace tags {
inline constexpr std::uint64_t kEntanglerW = 1;
inline constexpr std::uint64_t kEntanglerB = 2;
inline constexpr std::uint64_t kEntanglerPad = 3;
inline constexpr std::uint64_t kEntanglerPerm = 4;
inline constexpr std::uint64_t kFlowMixing = 10;
inline constexpr std::uint64_t kFlowInit = 11;
inline constexpr std::uint64_t kMlpInit = 20;
inline constexpr std::uint64_t kTrainSplit = 21;
inline constexpr std::uint64_t kExplore = 30;
inline constexpr std::uint64_t kJacobianBatch = 31;
inline constexpr std::uint64_t kAcquirePool = 32;
inline constexpr std::uint64_t kComplexity = 40;
inline constexpr std::uint64_t kTestTasks = 41;
inline constexpr std::uint64_t kNoise = 42;
inline constexpr std::uint64_t kEtaSamples = 43;
inline constexpr std::uint64_t kEntanglerSeed = 44;
inline constexpr std::uint64_t kTrainSeed = 45;
inline constexpr std::uint64_t kProposalInit = 46;
inline constexpr std::uint64_t kGradientCheck = 50;
}  // namespace tags

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key = 0) : key_(key) {}

  static CounterRng from(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0) {
    return CounterRng(derive_key(seed, tag, index));
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in the open interval (lo, hi).
  double uniform_open(double lo, double hi) {
    for (;;) {
      const double u = uniform();
      if (u == 0.0) continue;
      const double x = lo + (hi - lo) * u;
      if (x > lo && x < hi) return x;
    }
  }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  /// Standard normal via Box-Muller (one draw per call, two uniforms consumed).
  double normal() {
    double u1 = 0.0;
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Child stream; does not advance this one.
  CounterRng split(std::uint64_t tag, std::uint64_t index = 0) const {
    return CounterRng(derive_key(key_, tag, index));
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace twincher
