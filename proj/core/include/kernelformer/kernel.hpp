// Reference Nadaraya-Watson estimator and its integral (population)
// counterpart; the oracle the constructed network is checked against.
#pragma once

#include <cstdint>

#include "kernelformer/manifold.hpp"

namespace kf {

struct Bandwidth {
  double h = 0.5;

  explicit Bandwidth(double hh);
  // The theory assumes h in (0,1); h >= 1 is usable but flagged.
  bool in_theory_range() const { return h < 1.0; }
};

double gaussian_kernel(const Point& u, const Bandwidth& h);

double nw_estimate(const Prompt& p, const Bandwidth& h);

double integral_estimate_mc(const Manifold& m, const IsometricEmbedding& e,
                            const HolderFunction& f, const Point& x_query,
                            const Bandwidth& h, int mc_samples, uint64_t seed);

Bandwidth bandwidth_for(int n, double alpha, int d);

}  // namespace kf
