#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace horeg {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded generator used everywhere randomness is needed.
///
/// Doubles and bounded ints are derived from raw mt19937_64 words by fixed
/// arithmetic rather than std::uniform_*_distribution, so identical seeds
/// produce identical streams on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  /// Independent child generator; `id` names the stream.
  Rng stream(std::uint64_t id) const {
    return Rng(splitmix64(seed_ ^ splitmix64(id + 0x517cc1b727220a95ULL)));
  }

  std::uint64_t bits() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound), unbiased via rejection.
  std::uint64_t uniform_int(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = bits();
    while (x >= limit) x = bits();
    return x % bound;
  }

  /// Standard normal via Box-Muller (no cached spare).
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace horeg
