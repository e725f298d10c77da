#include "catfuse/rng.hpp"

#include <cmath>

namespace catfuse {

namespace {
uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
} // namespace

double Rng::next_normal() {
  double u1 = next_double();
  double u2 = next_double();
  if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586476925286766559 * u2);
}

uint64_t Rng::next_below(uint64_t n) {
  if (n == 0) return 0;
  // Reject draws above the largest multiple of n.
  const uint64_t limit = n * ((~uint64_t{0}) / n);
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

Rng Rng::split(uint64_t salt) {
  return Rng(mix64(next_u64() ^ (0xD1B54A32D192ED03ULL * (salt + 1))));
}

} // namespace catfuse
