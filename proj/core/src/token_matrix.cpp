#include "kernelformer/token_matrix.hpp"

#include <cmath>
#include <numbers>

#include "kernelformer/error.hpp"

namespace kf {

std::pair<double, double> positional_encoding(int j, int ell) {
  if (j < 1 || j > ell)
    throw ParamError("positional encoding column out of range");
  // Factored so the rounded angle never exceeds fl(pi/2); the cosine of
  // every column stays strictly positive and ReLU passes static rows.
  double angle = std::numbers::pi *
                 (0.5 * static_cast<double>(j) / static_cast<double>(ell));
  return {std::cos(angle), std::sin(angle)};
}

TokenMatrix embed_prompt(const Prompt& p) {
  if (p.n < 1) throw ParamError("prompt needs at least one labeled point");
  int D = static_cast<int>(p.xs[0].size());
  TokenMatrix t;
  t.D = D;
  t.n = p.n;
  t.d_embed = D + 5;
  t.ell = 2 * p.n + 1;
  t.m = Dense(t.d_embed, t.ell);
  for (int c = 0; c < t.ell; ++c) {
    auto [co, si] = positional_encoding(c + 1, t.ell);
    t.m.at(t.row_cos(), c) = co;
    t.m.at(t.row_sin(), c) = si;
    t.m.at(t.row_ones(), c) = 1.0;
  }
  for (int i = 0; i <= p.n; ++i) {
    for (int r = 0; r < D; ++r) t.m.at(r, i) = p.xs[i][r];
    if (i < p.n) t.m.at(t.row_y(), i) = p.ys[i];
  }
  // hidden_label is deliberately never read; columns n+2..2n+1 carry only
  // the static rows.
  return t;
}

}  // namespace kf
