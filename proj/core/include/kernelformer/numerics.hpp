// Error-free float transforms and compensated summation used wherever a
// result must be certified to a few ulps instead of O(n) rounding noise.
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace kf {

inline constexpr double kEps = 0x1.0p-53;

struct SplitPair {
  double s;  // rounded result
  double e;  // exact residual, s + e == exact value
};

// Knuth two-sum: works for any a, b.
inline SplitPair two_sum(double a, double b) {
  double s = a + b;
  double ap = s - b;
  double bp = s - ap;
  double e = (a - ap) + (b - bp);
  return {s, e};
}

// FMA-based two-product: s + e == a * b exactly.
inline SplitPair two_prod(double a, double b) {
  double s = a * b;
  double e = std::fma(a, b, -s);
  return {s, e};
}

// One distillation pass: v becomes a vector with the same exact sum whose
// head terms shrink toward the rounding floor.
inline void vec_sum_pass(std::span<double> v) {
  for (size_t i = 1; i < v.size(); ++i) {
    SplitPair p = two_sum(v[i - 1], v[i]);
    v[i] = p.s;
    v[i - 1] = p.e;
  }
}

// Compensated sum with K - 1 distillation passes. K = 3 keeps the error
// near one ulp of the result for condition numbers up to ~1/eps^2.
inline double sum_k(std::span<double> v, int k = 3) {
  if (v.empty()) return 0.0;
  for (int pass = 0; pass < k - 1; ++pass) vec_sum_pass(v);
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// Accumulates exact product/sum terms, then reduces with sum_k. Reusable:
// clear() keeps the capacity. Term order is deterministic by construction.
class DotAccumulator {
 public:
  void clear() { buf_.clear(); }

  void add_product(double a, double b) {
    if (a == 0.0 || b == 0.0) return;  // exact zero term, no residual
    SplitPair p = two_prod(a, b);
    buf_.push_back(p.s);
    if (p.e != 0.0) buf_.push_back(p.e);
  }

  void add_term(double x) {
    if (x != 0.0) buf_.push_back(x);
  }

  double value(int k = 3) { return sum_k(buf_, k); }

 private:
  std::vector<double> buf_;
};

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// Smallest power of two >= x, for x in (0, 2^1023).
inline double pow2_ceil(double x) {
  int e = 0;
  double m = std::frexp(x, &e);  // x = m * 2^e, m in [0.5, 1)
  (void)m;
  double p = std::ldexp(1.0, e - 1);
  if (p < x) p *= 2.0;
  return p;
}

inline bool is_pow2(double x) {
  int e = 0;
  return x > 0.0 && std::frexp(x, &e) == 0.5;
}

}  // namespace kf
