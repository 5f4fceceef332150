// Prompt embedding into the token matrix: data rows, label row, scratch
// row, sinusoidal position rows, ones row. Row/column indices are 0-based
// in code; positional_encoding keeps the 1-based column convention of the
// mathematical layout.
#pragma once

#include <utility>

#include "kernelformer/manifold.hpp"
#include "kernelformer/matrix.hpp"

namespace kf {

struct TokenMatrix {
  int D = 0;        // ambient dimension
  int n = 0;        // labeled points
  int d_embed = 0;  // D + 5
  int ell = 0;      // 2n + 1
  Dense m;

  int row_y() const { return D; }
  int row_aux() const { return D + 1; }
  int row_cos() const { return D + 2; }
  int row_sin() const { return D + 3; }
  int row_ones() const { return D + 4; }
  int col_query() const { return n; }
  int col_target(int j) const { return n + 1 + j; }  // j in 0..n-1
};

// I_j = (cos(j*pi/2l), sin(j*pi/2l)) for 1-based column j in 1..l.
std::pair<double, double> positional_encoding(int j, int ell);

TokenMatrix embed_prompt(const Prompt& p);

}  // namespace kf
