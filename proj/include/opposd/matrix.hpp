#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "opposd/common.hpp"

namespace opposd {

// Row-major dense matrix of doubles. This is deliberately minimal: the
// networks in this project are small MLPs and the hot loops are written
// directly against contiguous rows.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }
  std::span<const double> row_span(std::size_t i) const {
    return {data.data() + i * cols, cols};
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const DenseMatrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

bool operator==(const DenseMatrix& a, const DenseMatrix& b);

// out = a * b
void matmul(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
// out = a * b^T
void matmul_bt(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);
// out = a^T * b
void matmul_at(const DenseMatrix& a, const DenseMatrix& b, DenseMatrix& out);

// Solves A x = b with Gaussian elimination and partial pivoting.
// Throws NumericError if A is singular to working precision.
VecD solve_linear(DenseMatrix a, VecD b);

}  // namespace opposd
