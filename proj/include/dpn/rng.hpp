#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace dpn {

// splitmix64 (Steele, Lea, Flood 2014). Chosen over std::mt19937 +
// std::*_distribution because the standard distributions are not pinned by
// the standard and differ across library implementations; every draw here is
// an exact arithmetic recipe, so seeded runs are bit-reproducible anywhere.
struct Rng {
  uint64_t state;

  explicit Rng(uint64_t seed) : state(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1): top 53 bits scaled by 2^-53
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds; rejection-free modulo is fine at our range sizes
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  // Box-Muller, one value per call (two uniform draws, no cached pair so the
  // draw count per call is fixed)
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double std) { return mean + std * normal(); }
};

// Hash-combines stream labels into an independent substream seed, so that
// e.g. (zone, candidate, step) each get their own generator regardless of
// evaluation order.
inline uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
  Rng h(0x6a09e667f3bcc908ull);
  uint64_t acc = h.next_u64();
  for (uint64_t p : parts) {
    Rng g(p ^ acc);
    acc = g.next_u64();
  }
  return acc;
}

inline Rng substream(uint64_t master, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
  return Rng(mix_seed({master, a, b, c}));
}

}  // namespace dpn
