#include "kernelformer/rng.hpp"

#include <cmath>
#include <numbers>

namespace kf {

uint64_t mix_seed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t derive_seed(uint64_t base, uint64_t stream) {
  return mix_seed(base ^ mix_seed(stream + 0x51ed2701a9e5a3c9ULL));
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  // u1 > 0 guaranteed by the offset; keeps log() finite.
  double u1 = (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

}  // namespace kf
