#pragma once

#include <cstdint>

namespace motiv {

/// SplitMix64: tiny, fast, and fully portable. Used everywhere randomness is
/// needed so results are identical across platforms and thread counts.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Box-Muller; consumes two uniforms per pair, caches the spare.
  double normal();

  double lognormal(double log_mean, double log_var);

  /// Derives an independent stream; hashing the tag keeps substreams
  /// decorrelated no matter how callers enumerate them.
  static uint64_t derive(uint64_t seed, uint64_t tag) {
    Rng h(seed ^ (0x9e3779b97f4a7c15ULL * (tag + 1)));
    return h.next();
  }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace motiv
