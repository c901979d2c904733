#pragma once

#include <cmath>
#include <cstdint>

#include "pcv2/common.hpp"

namespace pcv2 {

inline u64 splitmix64(u64 x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Counter-based generator: draw i of stream `seed` is a pure function of
// (seed, i), so encoder and decoder can reproduce any draw independent of
// call history. Used for hybrid-mode sampling (the seed travels in the
// bitstream header) and for corpus generation.
class CounterRng {
 public:
  explicit CounterRng(u64 seed) : seed_(seed) {}

  u64 next_u64() { return splitmix64(seed_ ^ (0xd1342543de82ef95ull * counter_++)); }

  // Uniform in [0,1) with 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  u64 next_below(u64 n) {
    require(n > 0, "next_below: n must be positive");
    return static_cast<u64>(next_double() * static_cast<double>(n)) % n;
  }

  // Box-Muller; one value per two uniforms keeps the stream position simple.
  double next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  u64 seed() const { return seed_; }
  u64 counter() const { return counter_; }

 private:
  u64 seed_;
  u64 counter_ = 0;
};

}  // namespace pcv2
