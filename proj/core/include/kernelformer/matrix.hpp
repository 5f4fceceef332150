// Minimal dense and sparse matrix containers. Sparse storage keeps large
// attention stacks in memory; semantics are always those of the dense
// matrix with zeros in unlisted slots.
#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

namespace kf {

struct Dense {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;  // row-major

  Dense() = default;
  Dense(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

// Coordinate-list sparse matrix. Entries are kept sorted row-major with
// unique slots once finalize() runs; builders emit entries in order.
struct SparseMat {
  int rows = 0;
  int cols = 0;
  std::vector<uint32_t> ri;
  std::vector<uint32_t> ci;
  std::vector<double> v;

  SparseMat() = default;
  SparseMat(int r, int c) : rows(r), cols(c) {}

  size_t nnz() const { return v.size(); }

  void add(int r, int c, double val) {
    assert(r >= 0 && r < rows && c >= 0 && c < cols);
    ri.push_back(static_cast<uint32_t>(r));
    ci.push_back(static_cast<uint32_t>(c));
    v.push_back(val);
  }

  bool sorted_unique() const {
    for (size_t i = 1; i < v.size(); ++i) {
      uint64_t prev = (static_cast<uint64_t>(ri[i - 1]) << 32) | ci[i - 1];
      uint64_t cur = (static_cast<uint64_t>(ri[i]) << 32) | ci[i];
      if (cur <= prev) return false;
    }
    return true;
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : v) {
      double ax = x < 0.0 ? -x : x;
      if (ax > m) m = ax;
    }
    return m;
  }

  Dense to_dense() const {
    Dense d(rows, cols);
    for (size_t i = 0; i < v.size(); ++i) d.at(ri[i], ci[i]) = v[i];
    return d;
  }

  // y = M * x for a dense column x of length cols; y has length rows.
  // Accumulation order follows storage order (deterministic).
  void mul_column(const double* x, double* y) const {
    for (int r = 0; r < rows; ++r) y[r] = 0.0;
    for (size_t i = 0; i < v.size(); ++i) y[ri[i]] += v[i] * x[ci[i]];
  }

  bool operator==(const SparseMat& o) const = default;
};

}  // namespace kf
