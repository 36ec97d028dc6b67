#pragma once
// Counter-based random numbers: every disorder cell value is a pure function of
// (master seed, replica id, time n, site x). No state, no traversal-order
// dependence, bitwise reproducible at any worker count.
#include <cstdint>
#include <cmath>

namespace polymer2d {

// splitmix64 finalizer: bijective on u64, full avalanche.
inline uint64_t mix64(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t pack_xy(int32_t a, int32_t b) {
  return (uint64_t(uint32_t(a)) << 32) | uint64_t(uint32_t(b));
}

// uniform in (0,1), strictly inside
inline double u01(uint64_t h) {
  return double(h >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

// Keyed counter RNG for one (seed, replica) pair.
struct CellRng {
  uint64_t seed = 0, replica = 0;

  // hoisted per-slice key; cells in a slice then need a single mix64 each
  uint64_t slice_key(int32_t n, uint32_t salt = 0) const {
    uint64_t h = mix64(seed ^ 0x6c62272e07bb0142ull);
    h = mix64(h ^ replica);
    return mix64(h ^ pack_xy(n, int32_t(salt)));
  }
  static uint64_t cell_bits(uint64_t skey, int32_t x1, int32_t x2) {
    return mix64(skey ^ pack_xy(x1, x2));
  }
  uint64_t bits(int32_t n, int32_t x1, int32_t x2, uint32_t salt = 0) const {
    return cell_bits(slice_key(n, salt), x1, x2);
  }
};

// standard normal from two u64 (Box-Muller, cosine branch)
inline double normal_from_bits(uint64_t b1, uint64_t b2) {
  double r = std::sqrt(-2.0 * std::log(u01(b1)));
  return r * std::cos(6.283185307179586477 * u01(b2));
}

// Sequential stream for path / renewal sampling (not cell-addressed).
// Disjointness across uses comes from the salt in the seeding chain.
struct SeqRng {
  uint64_t state;
  SeqRng(uint64_t seed, uint64_t replica, uint32_t salt)
      : state(mix64(mix64(seed ^ 0x71ee2147a9b1cdf3ull) ^ replica) ^
              (0x9e3779b97f4a7c15ull * (salt + 1))) {}
  uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return u01(next()); }
  double normal() {
    uint64_t a = next(), b = next();
    return normal_from_bits(a, b);
  }
  // uniform integer in [0, m)
  uint64_t below(uint64_t m) { return next() % m; }
};

}  // namespace polymer2d
