#include "kernelformer/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "kernelformer/error.hpp"
#include "kernelformer/rng.hpp"

using namespace kf;

namespace {

const Manifold kCircle{ManifoldKind::Circle, 1.0};
const Manifold kSphere{ManifoldKind::Sphere2, 1.0};
const Manifold kTorus{ManifoldKind::CliffordTorus2, 1.0};
const Manifold kAll[] = {kCircle, kSphere, kTorus};

double chordal(const Point& a, const Point& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("manifold descriptors") {
  CHECK(kCircle.intrinsic_dim() == 1);
  CHECK(kSphere.intrinsic_dim() == 2);
  CHECK(kTorus.intrinsic_dim() == 2);
  CHECK(kCircle.base_ambient_dim() == 2);
  CHECK(kSphere.base_ambient_dim() == 3);
  CHECK(kTorus.base_ambient_dim() == 4);
  Manifold s3{ManifoldKind::Sphere2, 3.0};
  CHECK(s3.reach() == 3.0);
  CHECK(s3.coord_bound() == 3.0);
  CHECK(parse_manifold("circle", 1.0).kind == ManifoldKind::Circle);
  CHECK(parse_manifold("sphere", 2.0).radius == 2.0);
  CHECK(parse_manifold("torus", 1.0).kind == ManifoldKind::CliffordTorus2);
  CHECK_THROWS_AS(parse_manifold("klein", 1.0), ParamError);
  CHECK_THROWS_AS(parse_manifold("circle", 0.0), ParamError);
  CHECK_THROWS_AS(parse_manifold("circle", -1.0), ParamError);
}

TEST_CASE("geodesic distances hit closed-form values") {
  // Circle r=1: quarter arc and a wrap-around arc.
  Point a = {1.0, 0.0};
  Point b = {std::cos(1.5707963267948966), std::sin(1.5707963267948966)};
  CHECK(geodesic_distance(kCircle, a, b) ==
        doctest::Approx(1.5707963267948966).epsilon(1e-13));
  Point c = {std::cos(0.3), std::sin(0.3)};
  Point d = {std::cos(2.9), std::sin(2.9)};
  CHECK(geodesic_distance(kCircle, c, d) == doctest::Approx(2.6).epsilon(1e-13));
  Point e = {std::cos(4.0), std::sin(4.0)};
  CHECK(geodesic_distance(kCircle, a, e) ==
        doctest::Approx(2.2831853071795867).epsilon(1e-13));

  // Sphere r=2: antipodal points sit half a great circle apart.
  Manifold s2{ManifoldKind::Sphere2, 2.0};
  Point p = {0.0, 0.0, 2.0};
  Point q = {0.0, 0.0, -2.0};
  CHECK(geodesic_distance(s2, p, q) ==
        doctest::Approx(6.283185307179586).epsilon(1e-13));

  // Sphere r=3, generic pair, oracle value from high-precision arithmetic.
  Manifold s3{ManifoldKind::Sphere2, 3.0};
  Point u = {2.474092765300124, 0.5015234323057377, 1.6209069176044193};
  Point v = {-0.5897889995227683, 1.0084486818771135, 2.7631829820086553};
  CHECK(geodesic_distance(s3, u, v) ==
        doctest::Approx(3.504906232965823).epsilon(1e-12));

  // Torus r=1.5: independent factor arcs 2.6 and 2pi-5.5 combine in L2.
  Manifold t{ManifoldKind::CliffordTorus2, 1.5};
  Point w = {1.433004733688409, 0.4432803099920093, 1.391217646116054,
             -0.560814997245354};
  Point z = {-1.4564372477243859, 0.3588739938209736, 1.3815914910043277,
             0.5841275134629758};
  CHECK(geodesic_distance(t, w, z) ==
        doctest::Approx(4.073095046412428).epsilon(1e-12));
}

TEST_CASE("geodesic rejects off-manifold points") {
  CHECK_THROWS_AS(geodesic_distance(kCircle, {2.0, 0.0}, {1.0, 0.0}),
                  DomainError);
  CHECK_THROWS_AS(geodesic_distance(kSphere, {0.0, 0.0, 1.0}, {0.1, 0.1, 0.1}),
                  DomainError);
  CHECK_THROWS_AS(
      geodesic_distance(kTorus, {1, 0, 1, 0}, {1, 0, 0.5, 0.5}), DomainError);
}

TEST_CASE("metric axioms on sampled triples") {
  for (const Manifold& m : kAll) {
    std::vector<Point> pts = sample_uniform(m, 300, 99);
    Rng rng(100);
    double diam = 3.15 * m.radius * (m.kind == ManifoldKind::CliffordTorus2
                                         ? std::sqrt(2.0)
                                         : 1.0);
    for (int t = 0; t < 10000; ++t) {
      const Point& x = pts[rng.raw() % pts.size()];
      const Point& y = pts[rng.raw() % pts.size()];
      const Point& z = pts[rng.raw() % pts.size()];
      double dxy = geodesic_distance(m, x, y);
      double dyx = geodesic_distance(m, y, x);
      CHECK(dxy == dyx);  // symmetry is exact
      CHECK(dxy >= 0.0);
      CHECK(dxy <= diam);
      CHECK(geodesic_distance(m, x, z) <= dxy + geodesic_distance(m, y, z) + 1e-9);
      CHECK(chordal(x, y) <= dxy + 1e-12);
    }
    for (const Point& x : pts) CHECK(geodesic_distance(m, x, x) == 0.0);
  }
}

TEST_CASE("sample_uniform stays on the manifold and is seed-deterministic") {
  for (const Manifold& m : kAll) {
    std::vector<Point> pts = sample_uniform(m, 64, 5);
    CHECK(pts.size() == 64);
    for (const Point& x : pts) {
      CHECK(static_cast<int>(x.size()) == m.base_ambient_dim());
      if (m.kind == ManifoldKind::CliffordTorus2) {
        CHECK(std::fabs(x[0] * x[0] + x[1] * x[1] - 1.0) <= 1e-12);
        CHECK(std::fabs(x[2] * x[2] + x[3] * x[3] - 1.0) <= 1e-12);
      } else {
        double s = 0;
        for (double c : x) s += c * c;
        CHECK(std::fabs(s - 1.0) <= 1e-12);
      }
      for (double c : x) CHECK(std::fabs(c) <= m.coord_bound() + 1e-12);
    }
    CHECK(sample_uniform(m, 64, 5) == pts);
    CHECK(sample_uniform(m, 64, 6) != pts);
  }
  CHECK_THROWS_AS(sample_uniform(kCircle, 0, 1), ParamError);
}

TEST_CASE("sphere sampling is symmetric in every coordinate") {
  std::vector<Point> pts = sample_uniform(kSphere, 100000, 11);
  for (int k = 0; k < 3; ++k) {
    double mean = 0;
    for (const Point& x : pts) mean += x[k];
    mean /= static_cast<double>(pts.size());
    CHECK(std::fabs(mean) <= 0.02);  // 6 sigma of 1/sqrt(3N)
  }
}

TEST_CASE("embedding frames are orthonormal isometries") {
  for (int D : {2, 3, 5, 30}) {
    IsometricEmbedding e = make_embedding(D, 2, 77);
    CHECK(e.target_dim == D);
    CHECK(e.matrix.rows == D);
    CHECK(e.matrix.cols == 2);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        double dot = 0;
        for (int r = 0; r < D; ++r) dot += e.matrix.at(r, i) * e.matrix.at(r, j);
        CHECK(std::fabs(dot - (i == j ? 1.0 : 0.0)) <= 1e-12);
      }
    std::vector<Point> pts = sample_uniform(kCircle, 32, 13);
    for (size_t i = 1; i < pts.size(); ++i) {
      Point ex = embed_ambient(e, pts[i - 1]);
      Point ey = embed_ambient(e, pts[i]);
      CHECK(static_cast<int>(ex.size()) == D);
      double base = chordal(pts[i - 1], pts[i]);
      CHECK(std::fabs(chordal(ex, ey) - base) <= 1e-12 * std::max(1.0, base));
      double norm = chordal(ex, Point(D, 0.0));
      CHECK(std::fabs(norm - 1.0) <= 1e-12);  // circle radius preserved
    }
  }
  // Same seed, same frame; embeddings are deterministic.
  IsometricEmbedding a = make_embedding(7, 3, 5);
  IsometricEmbedding b = make_embedding(7, 3, 5);
  CHECK(a.matrix.a == b.matrix.a);
  CHECK_THROWS_AS(make_embedding(2, 3, 1), ParamError);
}

TEST_CASE("holder functions obey their class contract") {
  for (double alpha : {0.5, 1.0}) {
    for (const Manifold& m : kAll) {
      HolderFunction f = make_holder_function(m, 2.0, alpha, 1.5, 6, 31);
      std::vector<Point> pts = sample_uniform(m, 200, 41);
      Rng rng(51);
      for (int t = 0; t < 10000; ++t) {
        const Point& x = pts[rng.raw() % pts.size()];
        const Point& y = pts[rng.raw() % pts.size()];
        double fx = eval_holder(m, f, x);
        double fy = eval_holder(m, f, y);
        CHECK(std::fabs(fx) <= 1.5);
        double lim = 2.0 * std::pow(geodesic_distance(m, x, y), alpha);
        CHECK(std::fabs(fx - fy) <= lim * (1 + 1e-12) + 1e-12);
      }
    }
  }
}

TEST_CASE("holder evaluation follows the min-plus formula") {
  // Single anchor with zero offset evaluates to zero at the anchor.
  HolderFunction f;
  f.anchors = {{1.0, 0.0}};
  f.offsets = {0.0};
  f.L = 2.0;
  f.alpha = 1.0;
  f.R = 10.0;
  CHECK(eval_holder(kCircle, f, {1.0, 0.0}) == 0.0);
  Point x = {std::cos(0.7), std::sin(0.7)};
  CHECK(eval_holder(kCircle, f, x) == doctest::Approx(1.4).epsilon(1e-13));

  // The minimum selects the cheaper branch.
  f.anchors = {{1.0, 0.0}, {-1.0, 0.0}};
  f.offsets = {-5.0, 5.0};
  CHECK(eval_holder(kCircle, f, {1.0, 0.0}) == -5.0);

  // Clamp ceiling: all offsets at 2R force the cap.
  f.offsets = {20.0, 20.0};
  CHECK(eval_holder(kCircle, f, x) == 10.0);

  CHECK_THROWS_AS(make_holder_function(kCircle, 0.0, 1.0, 1.0, 3, 1),
                  ParamError);
  CHECK_THROWS_AS(make_holder_function(kCircle, 1.0, 1.5, 1.0, 3, 1),
                  ParamError);
  CHECK_THROWS_AS(make_holder_function(kCircle, 1.0, 1.0, 1.0, 0, 1),
                  ParamError);
}

TEST_CASE("generate_task produces consistent deterministic prompts") {
  HolderFunction f = make_holder_function(kSphere, 1.0, 1.0, 2.0, 4, 3);
  IsometricEmbedding e = make_embedding(10, 3, 9);
  Prompt p = generate_task(kSphere, e, f, 50, 17);
  CHECK(p.n == 50);
  CHECK(p.xs.size() == 51);
  CHECK(p.ys.size() == 50);
  for (double y : p.ys) CHECK(std::fabs(y) <= 2.0);
  CHECK(std::fabs(p.hidden_label) <= 2.0);
  for (const Point& x : p.xs) {
    CHECK(static_cast<int>(x.size()) == 10);
    for (double c : x) CHECK(std::fabs(c) <= 1.0 + 1e-12);
  }
  Prompt q = generate_task(kSphere, e, f, 50, 17);
  CHECK(q.xs == p.xs);
  CHECK(q.ys == p.ys);
  CHECK(q.hidden_label == p.hidden_label);

  Prompt one = generate_task(kSphere, e, f, 1, 23);
  CHECK(one.xs.size() == 2);
  CHECK(one.ys.size() == 1);
}
