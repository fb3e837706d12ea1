#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace boxfuse {

// SplitMix64 output mix.
inline std::uint64_t mix_bits(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Folds one identifier word into a substream key.
inline std::uint64_t combine_key(std::uint64_t key, std::uint64_t word) {
  return mix_bits(key + 0x9E3779B97F4A7C15ULL * (word + 1));
}

// Small counter-based generator: the key alone fixes the whole sequence, so
// draws stay reproducible regardless of the order substreams are visited in.
class SubstreamRng {
 public:
  explicit SubstreamRng(std::uint64_t key) : state_(key) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix_bits(state_);
  }

  // Uniform in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller; the spare variate is cached.
  double next_gaussian(double mean, double sigma) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + sigma * spare_;
    }
    const double u1 = 1.0 - next_unit();  // (0, 1]
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + sigma * r * std::cos(theta);
  }

  // Knuth's method; fine for the small rates used here.
  int next_poisson(double lambda) {
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= next_unit();
    } while (p > limit);
    return k - 1;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace boxfuse
