#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "sma/error.hpp"
#include "sma/rational.hpp"

namespace sma {

template <typename T>
using Vec = std::vector<T>;

// Small dense row-major matrix. The compiled artifacts are tiny enough that a
// flat vector beats any heavier linear algebra dependency, and it works with
// exact rational scalars.
template <typename T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;  // row-major, rows*cols entries

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, T(0)) {}

  T& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  const T& at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

template <typename T>
Vec<T> matvec(const Mat<T>& m, const Vec<T>& x) {
  if (static_cast<int>(x.size()) != m.cols) fail("DimMismatch", "matvec dimension mismatch");
  Vec<T> y(m.rows, T(0));
  for (int r = 0; r < m.rows; ++r) {
    T acc(0);
    const T* row = m.data.data() + static_cast<size_t>(r) * m.cols;
    for (int c = 0; c < m.cols; ++c) {
      if (row[c] != T(0)) acc += row[c] * x[c];
    }
    y[r] = std::move(acc);
  }
  return y;
}

// Sparse row-major matrix over exact rationals. The transformer compiler
// emits matrices whose rows carry a handful of nonzeros; evaluation cost
// tracks the nonzero count.
struct SpMat {
  int rows = 0;
  int cols = 0;
  std::vector<std::vector<std::pair<int, Rational>>> row;

  SpMat() = default;
  SpMat(int r, int c) : rows(r), cols(c), row(r) {}

  void set(int r, int c, Rational v) {
    if (v == 0) return;
    row[r].emplace_back(c, std::move(v));
  }

  size_t nnz() const {
    size_t n = 0;
    for (const auto& r : row) n += r.size();
    return n;
  }
};

template <typename T>
Vec<T> sp_matvec(const SpMat& m, const Vec<T>& x) {
  if (static_cast<int>(x.size()) != m.cols) fail("DimMismatch", "sparse matvec dimension mismatch");
  Vec<T> y(m.rows, T(0));
  for (int r = 0; r < m.rows; ++r) {
    T acc(0);
    for (const auto& [c, v] : m.row[r]) acc += scalar_cast<T>(v) * x[c];
    y[r] = std::move(acc);
  }
  return y;
}

inline double to_double_generic(double x) { return x; }
inline double to_double_generic(const Rational& x) { return x.get_d(); }

template <typename T>
double l2_norm_double(const Vec<T>& v) {
  double s = 0;
  for (const auto& x : v) {
    double d = to_double_generic(x);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace sma
