#include "kernelformer/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kernelformer/error.hpp"

namespace kf {

namespace {

double sq_norm_diff(const Point& a, const Point& b) {
  double s = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

}  // namespace

Bandwidth::Bandwidth(double hh) : h(hh) {
  if (!(h > 0.0)) throw ParamError("bandwidth must be positive");
}

double gaussian_kernel(const Point& u, const Bandwidth& h) {
  double s = 0.0;
  for (double x : u) s += x * x;
  return std::exp(-s / (h.h * h.h));
}

double nw_estimate(const Prompt& p, const Bandwidth& h) {
  if (p.n < 1) throw ParamError("estimator needs at least one labeled point");
  const Point& q = p.xs[p.n];
  double h2 = h.h * h.h;
  // Exponent shift: the ratio is invariant, and weights never underflow
  // to a 0/0 even when all distances are huge.
  std::vector<double> ex(p.n);
  double mn = std::numeric_limits<double>::infinity();
  for (int i = 0; i < p.n; ++i) {
    ex[i] = sq_norm_diff(q, p.xs[i]) / h2;
    mn = std::min(mn, ex[i]);
  }
  double num = 0.0, den = 0.0;
  for (int i = 0; i < p.n; ++i) {
    double w = std::exp(mn - ex[i]);
    num += w * p.ys[i];
    den += w;
  }
  return num / den;
}

double integral_estimate_mc(const Manifold& m, const IsometricEmbedding& e,
                            const HolderFunction& f, const Point& x_query,
                            const Bandwidth& h, int mc_samples, uint64_t seed) {
  if (mc_samples < 1000) throw ParamError("mc_samples must be at least 1000");
  std::vector<Point> base = sample_uniform(m, mc_samples, seed);
  double h2 = h.h * h.h;
  std::vector<double> ex(mc_samples), fv(mc_samples);
  double mn = std::numeric_limits<double>::infinity();
  for (int i = 0; i < mc_samples; ++i) {
    Point amb = embed_ambient(e, base[i]);
    ex[i] = sq_norm_diff(x_query, amb) / h2;
    fv[i] = eval_holder(m, f, base[i]);
    mn = std::min(mn, ex[i]);
  }
  double num = 0.0, den = 0.0;
  for (int i = 0; i < mc_samples; ++i) {
    double w = std::exp(mn - ex[i]);
    num += w * fv[i];
    den += w;
  }
  return num / den;
}

Bandwidth bandwidth_for(int n, double alpha, int d) {
  if (n < 1) throw ParamError("bandwidth_for needs n >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ParamError("holder exponent must lie in (0, 1]");
  if (d < 1) throw ParamError("intrinsic dimension must be at least 1");
  return Bandwidth(std::pow(static_cast<double>(n), -1.0 / (2.0 * alpha + d)));
}

}  // namespace kf
