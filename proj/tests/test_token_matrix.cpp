#include "kernelformer/token_matrix.hpp"

#include <cmath>

#include "doctest.h"
#include "kernelformer/error.hpp"

using namespace kf;

TEST_CASE("positional encoding convention and range") {
  // 1-based column j in 1..ell, angle pi/2 * (j/ell).
  auto [c1, s1] = positional_encoding(1, 3);
  CHECK(c1 == 0.8660254037844387);
  CHECK(s1 == 0.49999999999999994);
  auto [c2, s2] = positional_encoding(2, 3);
  CHECK(c2 == 0.5000000000000001);
  CHECK(s2 == 0.8660254037844386);
  auto [c3, s3] = positional_encoding(3, 3);
  CHECK(c3 == 6.123233995736766e-17);
  CHECK(s3 == 1.0);

  CHECK_THROWS_AS(positional_encoding(0, 3), ParamError);
  CHECK_THROWS_AS(positional_encoding(4, 3), ParamError);

  // The cosine must stay strictly positive at every column of every
  // realistic length: static rows ride through ReLU unchanged only if
  // cos > 0. The last column is the worst case.
  for (int ell : {1, 2, 3, 5, 26, 127, 4097}) {
    double prev = 2.0;
    for (int j = 1; j <= ell; ++j) {
      auto [c, s] = positional_encoding(j, ell);
      CHECK(c > 0.0);
      CHECK(s > 0.0);
      CHECK(c < prev);  // strictly decreasing with the column
      CHECK(std::fabs(c * c + s * s - 1.0) <= 4e-16);
      prev = c;
    }
  }
}

TEST_CASE("embed_prompt lays out rows and columns as documented") {
  Prompt p;
  p.n = 2;
  p.xs = {{0.1, -0.2, 0.3}, {0.4, 0.5, -0.6}, {-0.7, 0.8, 0.9}};
  p.ys = {1.5, -2.5};
  p.hidden_label = 99.0;  // must never be read

  TokenMatrix t = embed_prompt(p);
  CHECK(t.D == 3);
  CHECK(t.n == 2);
  CHECK(t.d_embed == 8);
  CHECK(t.ell == 5);
  CHECK(t.m.rows == 8);
  CHECK(t.m.cols == 5);
  CHECK(t.row_y() == 3);
  CHECK(t.row_aux() == 4);
  CHECK(t.row_cos() == 5);
  CHECK(t.row_sin() == 6);
  CHECK(t.row_ones() == 7);
  CHECK(t.col_query() == 2);
  CHECK(t.col_target(0) == 3);
  CHECK(t.col_target(1) == 4);

  // Data columns carry the sample coordinates, the query column the query.
  for (int i = 0; i <= 2; ++i)
    for (int r = 0; r < 3; ++r) CHECK(t.m.at(r, i) == p.xs[i][r]);
  CHECK(t.m.at(t.row_y(), 0) == 1.5);
  CHECK(t.m.at(t.row_y(), 1) == -2.5);
  // Query label cell and target block are zero: the hidden label is not
  // part of the input.
  CHECK(t.m.at(t.row_y(), 2) == 0.0);
  for (int c = 3; c < 5; ++c)
    for (int r = 0; r < 5; ++r) CHECK(t.m.at(r, c) == 0.0);
  // Scratch row is zero everywhere.
  for (int c = 0; c < 5; ++c) CHECK(t.m.at(t.row_aux(), c) == 0.0);
  // Positional rows follow the 1-based encoding; ones row is ones.
  for (int c = 0; c < 5; ++c) {
    auto [co, si] = positional_encoding(c + 1, 5);
    CHECK(t.m.at(t.row_cos(), c) == co);
    CHECK(t.m.at(t.row_sin(), c) == si);
    CHECK(t.m.at(t.row_ones(), c) == 1.0);
  }

  CHECK_THROWS_AS(embed_prompt(Prompt{}), ParamError);
}
