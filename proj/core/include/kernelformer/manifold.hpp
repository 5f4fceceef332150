// Compact model manifolds with closed-form geodesics, Holder test
// functions on them, and isometric embeddings into higher dimension.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kernelformer/matrix.hpp"

namespace kf {

using Point = std::vector<double>;

enum class ManifoldKind { Circle, Sphere2, CliffordTorus2 };

struct Manifold {
  ManifoldKind kind = ManifoldKind::Circle;
  double radius = 1.0;

  int intrinsic_dim() const { return kind == ManifoldKind::Circle ? 1 : 2; }
  int base_ambient_dim() const {
    switch (kind) {
      case ManifoldKind::Circle: return 2;
      case ManifoldKind::Sphere2: return 3;
      case ManifoldKind::CliffordTorus2: return 4;
    }
    return 0;
  }
  // Reach is a recorded constant per manifold, never computed.
  double reach() const { return radius; }
  // Every ambient coordinate of an on-manifold point lies in [-b, b].
  double coord_bound() const { return radius; }
  std::string name() const;
};

Manifold parse_manifold(const std::string& name, double radius);

std::vector<Point> sample_uniform(const Manifold& m, int count, uint64_t seed);

double geodesic_distance(const Manifold& m, const Point& x, const Point& y);

struct HolderFunction {
  std::vector<Point> anchors;
  std::vector<double> offsets;
  double L = 1.0;
  double alpha = 1.0;
  double R = 1.0;
};

HolderFunction make_holder_function(const Manifold& m, double L, double alpha,
                                    double R, int num_anchors, uint64_t seed);

double eval_holder(const Manifold& m, const HolderFunction& f, const Point& x);

struct IsometricEmbedding {
  int target_dim = 0;
  Dense matrix;  // target_dim x base_ambient_dim, orthonormal columns
};

// Zero-pad then rotate by a seeded random orthonormal frame.
IsometricEmbedding make_embedding(int target_dim, int base_dim, uint64_t seed);

Point embed_ambient(const IsometricEmbedding& e, const Point& x);

struct Prompt {
  std::vector<Point> xs;  // n+1 ambient points, query last
  std::vector<double> ys;  // n visible labels
  double hidden_label = 0.0;
  int n = 0;
};

Prompt generate_task(const Manifold& m, const IsometricEmbedding& e,
                     const HolderFunction& f, int n, uint64_t seed);

}  // namespace kf
