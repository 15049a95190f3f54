#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace spinkick {

// Deterministic random stream. Only the raw mt19937_64 output is consumed;
// uniform and normal variates are derived with fixed arithmetic so that the
// same seed yields the same sequence on every platform and compiler
// (std::<distribution> implementations are not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1), 53-bit resolution
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; caches the second variate of each pair.
  double normal(double mean, double sigma) {
    if (have_cached_) {
      have_cached_ = false;
      return mean + sigma * cached_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 == 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return mean + sigma * r * std::cos(a);
  }

 private:
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// SplitMix64 step; used to derive independent stream seeds from a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace spinkick
