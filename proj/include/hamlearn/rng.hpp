#pragma once

#include <cstdint>
#include <limits>

namespace hamlearn {

/// Counter-based SplitMix64 generator.
///
/// Output n (n = 1, 2, ...) of a stream with key `k` is `mix64(k + n * 0x9E3779B97F4A7C15)`,
/// where `mix64` is the SplitMix64 finalizer. Independent streams are derived with
/// `substream(seed, index)`, which keys a generator by `mix64(seed ^ mix64(index + golden))`.
/// Every seeded quantity in the library (random chains, shot sampling, noise) is drawn this
/// way, so results are reproducible from a single 64-bit seed on any platform.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit constexpr CounterRng(std::uint64_t key) : key_(key) {}

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  static constexpr CounterRng substream(std::uint64_t seed, std::uint64_t index) {
    return CounterRng(mix64(seed ^ mix64(index + kGolden)));
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  constexpr std::uint64_t key() const { return key_; }
  constexpr std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(CounterRng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(CounterRng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal draw (Box-Muller, cosine branch, two uniforms per draw).
double standard_normal(CounterRng& rng);

}  // namespace hamlearn
