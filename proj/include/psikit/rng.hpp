#pragma once

#include <cmath>
#include <cstdint>

namespace psikit {

// One round of the SplitMix64 mixing function. Used both as a standalone
// seed-derivation hash (per-sample and per-cell seeds) and as the output
// stage of the Rng stream below.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic counter-based generator. Every consumer of randomness in the
// toolkit owns one of these, seeded explicitly; there is no global RNG state.
// The sequence depends only on the seed, never on platform or library version.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform in [-mag, mag]. Exact zero when mag == 0.
  double next_symmetric(double mag) { return mag * (2.0 * next_unit() - 1.0); }

  // Fair sign, +1 or -1.
  double next_sign() { return (next_u64() & 1u) ? 1.0 : -1.0; }

  // Standard normal via Box-Muller. Consumes two draws per call; no cached
  // second value, so the stream position stays easy to reason about.
  double next_gauss() {
    double u1 = 0.0;
    do {
      u1 = next_unit();
    } while (u1 <= 0.0);
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Uniform integer in [0, n). Multiply-shift; bias is < 2^-32 per draw.
  std::uint32_t next_below(std::uint32_t n) {
    return static_cast<std::uint32_t>(
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(next_u64())) * n) >> 32);
  }

 private:
  std::uint64_t state_;
};

}  // namespace psikit
