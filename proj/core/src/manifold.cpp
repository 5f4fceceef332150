#include "kernelformer/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "kernelformer/error.hpp"
#include "kernelformer/rng.hpp"

namespace kf {

namespace {

constexpr double kPi = std::numbers::pi;

double sq(double x) { return x * x; }

void check_dim(const Manifold& m, const Point& x) {
  if (static_cast<int>(x.size()) != m.base_ambient_dim())
    throw DomainError("point dimension does not match manifold " + m.name());
}

// Relative on-manifold residual; 0 for exact points.
double manifold_residual(const Manifold& m, const Point& x) {
  double r2 = sq(m.radius);
  switch (m.kind) {
    case ManifoldKind::Circle:
      return std::fabs(sq(x[0]) + sq(x[1]) - r2) / r2;
    case ManifoldKind::Sphere2:
      return std::fabs(sq(x[0]) + sq(x[1]) + sq(x[2]) - r2) / r2;
    case ManifoldKind::CliffordTorus2: {
      double a = std::fabs(sq(x[0]) + sq(x[1]) - r2) / r2;
      double b = std::fabs(sq(x[2]) + sq(x[3]) - r2) / r2;
      return std::max(a, b);
    }
  }
  return 0.0;
}

void check_on_manifold(const Manifold& m, const Point& x, double tol) {
  check_dim(m, x);
  if (manifold_residual(m, x) > tol)
    throw DomainError("point is off the " + m.name() +
                      " (norm constraint violated beyond tolerance)");
}

// Arc angle between two circle points, in [0, pi]. atan2 of cross/dot is
// well conditioned near both 0 and pi.
double circle_angle(double x0, double x1, double y0, double y1) {
  double dot = x0 * y0 + x1 * y1;
  double cross = x0 * y1 - x1 * y0;
  return std::fabs(std::atan2(cross, dot));
}

}  // namespace

std::string Manifold::name() const {
  switch (kind) {
    case ManifoldKind::Circle: return "circle";
    case ManifoldKind::Sphere2: return "sphere";
    case ManifoldKind::CliffordTorus2: return "torus";
  }
  return "?";
}

Manifold parse_manifold(const std::string& name, double radius) {
  if (radius <= 0.0) throw ParamError("manifold radius must be positive");
  if (name == "circle") return {ManifoldKind::Circle, radius};
  if (name == "sphere") return {ManifoldKind::Sphere2, radius};
  if (name == "torus") return {ManifoldKind::CliffordTorus2, radius};
  throw ParamError("unknown manifold '" + name +
                   "' (expected circle, sphere, or torus)");
}

std::vector<Point> sample_uniform(const Manifold& m, int count, uint64_t seed) {
  if (count < 1) throw ParamError("sample_uniform: empty batch (count < 1)");
  Rng rng(seed);
  std::vector<Point> out;
  out.reserve(count);
  double r = m.radius;
  for (int i = 0; i < count; ++i) {
    switch (m.kind) {
      case ManifoldKind::Circle: {
        double t = rng.uniform(0.0, 2.0 * kPi);
        out.push_back({r * std::cos(t), r * std::sin(t)});
        break;
      }
      case ManifoldKind::Sphere2: {
        // Normalized Gaussian; fixed draw count (no rejection loop).
        double g0 = rng.normal(), g1 = rng.normal(), g2 = rng.normal();
        double nrm = std::sqrt(sq(g0) + sq(g1) + sq(g2));
        if (nrm == 0.0) { g0 = 1.0; nrm = 1.0; }
        out.push_back({r * g0 / nrm, r * g1 / nrm, r * g2 / nrm});
        break;
      }
      case ManifoldKind::CliffordTorus2: {
        double t0 = rng.uniform(0.0, 2.0 * kPi);
        double t1 = rng.uniform(0.0, 2.0 * kPi);
        out.push_back({r * std::cos(t0), r * std::sin(t0),
                       r * std::cos(t1), r * std::sin(t1)});
        break;
      }
    }
  }
  return out;
}

double geodesic_distance(const Manifold& m, const Point& x, const Point& y) {
  check_on_manifold(m, x, 1e-9);
  check_on_manifold(m, y, 1e-9);
  double r = m.radius;
  switch (m.kind) {
    case ManifoldKind::Circle:
      return r * circle_angle(x[0], x[1], y[0], y[1]);
    case ManifoldKind::Sphere2: {
      double dot = x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
      double c0 = x[1] * y[2] - x[2] * y[1];
      double c1 = x[2] * y[0] - x[0] * y[2];
      double c2 = x[0] * y[1] - x[1] * y[0];
      double cross = std::sqrt(sq(c0) + sq(c1) + sq(c2));
      return r * std::atan2(cross, dot);
    }
    case ManifoldKind::CliffordTorus2: {
      double a0 = circle_angle(x[0], x[1], y[0], y[1]);
      double a1 = circle_angle(x[2], x[3], y[2], y[3]);
      return std::sqrt(sq(r * a0) + sq(r * a1));
    }
  }
  return 0.0;
}

HolderFunction make_holder_function(const Manifold& m, double L, double alpha,
                                    double R, int num_anchors, uint64_t seed) {
  if (L <= 0.0) throw ParamError("holder constant L must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw ParamError("holder exponent must lie in (0, 1]");
  if (R <= 0.0) throw ParamError("holder bound R must be positive");
  if (num_anchors < 1) throw ParamError("need at least one anchor");
  HolderFunction f;
  f.L = L;
  f.alpha = alpha;
  f.R = R;
  f.anchors = sample_uniform(m, num_anchors, derive_seed(seed, 1));
  Rng rng(derive_seed(seed, 2));
  f.offsets.reserve(num_anchors);
  for (int j = 0; j < num_anchors; ++j) f.offsets.push_back(rng.uniform(-R, R));
  return f;
}

double eval_holder(const Manifold& m, const HolderFunction& f, const Point& x) {
  double best = std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < f.anchors.size(); ++j) {
    double d = geodesic_distance(m, x, f.anchors[j]);
    double v = f.offsets[j] + f.L * std::pow(d, f.alpha);
    best = std::min(best, v);
  }
  return std::clamp(best, -f.R, f.R);
}

IsometricEmbedding make_embedding(int target_dim, int base_dim, uint64_t seed) {
  if (target_dim < base_dim)
    throw ParamError("embedding target dimension below base dimension");
  Rng rng(derive_seed(seed, 3));
  Dense g(target_dim, base_dim);
  for (double& v : g.a) v = rng.normal();
  // Modified Gram-Schmidt with one reorthogonalization pass; the sign fix
  // makes the frame a deterministic function of the Gaussian draw.
  for (int c = 0; c < base_dim; ++c) {
    for (int pass = 0; pass < 2; ++pass) {
      for (int p = 0; p < c; ++p) {
        double dot = 0.0;
        for (int r = 0; r < target_dim; ++r) dot += g.at(r, p) * g.at(r, c);
        for (int r = 0; r < target_dim; ++r) g.at(r, c) -= dot * g.at(r, p);
      }
    }
    double nrm = 0.0;
    for (int r = 0; r < target_dim; ++r) nrm += sq(g.at(r, c));
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) throw Error("degenerate random frame");
    double s = g.at(c, c) < 0.0 ? -1.0 : 1.0;
    for (int r = 0; r < target_dim; ++r) g.at(r, c) *= s / nrm;
  }
  return {target_dim, std::move(g)};
}

Point embed_ambient(const IsometricEmbedding& e, const Point& x) {
  if (static_cast<int>(x.size()) != e.matrix.cols)
    throw DomainError("embedding input dimension mismatch");
  Point y(e.target_dim, 0.0);
  for (int r = 0; r < e.target_dim; ++r) {
    double s = 0.0;
    for (int c = 0; c < e.matrix.cols; ++c) s += e.matrix.at(r, c) * x[c];
    y[r] = s;
  }
  return y;
}

Prompt generate_task(const Manifold& m, const IsometricEmbedding& e,
                     const HolderFunction& f, int n, uint64_t seed) {
  if (n < 1) throw ParamError("prompt needs at least one labeled point");
  if (e.matrix.cols != m.base_ambient_dim())
    throw ParamError("embedding base dimension does not match manifold");
  std::vector<Point> base = sample_uniform(m, n + 1, derive_seed(seed, 4));
  Prompt p;
  p.n = n;
  p.xs.reserve(n + 1);
  for (const Point& b : base) p.xs.push_back(embed_ambient(e, b));
  p.ys.reserve(n);
  for (int i = 0; i < n; ++i) p.ys.push_back(eval_holder(m, f, base[i]));
  p.hidden_label = eval_holder(m, f, base[n]);
  return p;
}

}  // namespace kf
