#pragma once

#include <cstdint>

namespace catfuse {

/// Deterministic 64-bit generator: SplitMix64 (Steele, Lea, Flood 2014).
/// The state advances by the golden-gamma constant and the output is the
/// standard three-round finalizer, so the stream for a given seed is
/// identical on every platform. Parallel code must not share one instance;
/// derive independent children with split().
class Rng {
public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  float next_float() { return static_cast<float>(next_double()); }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  /// Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double next_normal();

  /// Uniform integer in [0, n); rejection-sampled so the draw is unbiased.
  uint64_t next_below(uint64_t n);

  /// Child generator with an independent stream. Consumes one draw from
  /// the parent; children with distinct salts are decorrelated by the
  /// SplitMix64 finalizer.
  Rng split(uint64_t salt);

private:
  uint64_t state_;
};

} // namespace catfuse
