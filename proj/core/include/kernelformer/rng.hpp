// Deterministic random source. Draw paths are fixed (no rejection loops,
// no library distributions) so streams are reproducible across platforms.
#pragma once

#include <cstdint>
#include <random>

namespace kf {

// splitmix64 finalizer, used to decorrelate user seeds and stream indices.
uint64_t mix_seed(uint64_t x);

// Seed for an independent stream derived from (base seed, stream index).
uint64_t derive_seed(uint64_t base, uint64_t stream);

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(mix_seed(seed)) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Box-Muller pair, one value cached; consumes exactly two uniforms
  // per pair regardless of outcome.
  double normal();

  uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace kf
