#pragma once

#include "opposd/common.hpp"
#include "opposd/matrix.hpp"

namespace opposd {

enum class BandwidthMode { median_heuristic, fixed };

struct KernelConfig {
  BandwidthMode bandwidth_mode = BandwidthMode::median_heuristic;
  double bandwidth = 1.0;
};

// exp(-||x - y||^2 / (2 bandwidth^2))
double rbf_kernel(std::span<const double> x, std::span<const double> y, double bandwidth);

// Median pairwise Euclidean distance over the sample; identical points fall
// back to 1. Rows beyond `max_points` are ignored (mini-batch approximation).
double median_bandwidth(const DenseMatrix& states, std::size_t max_points = 1000);

// K(i,j) = rbf(a_i, b_j); also returns the sum of all entries.
void rbf_kernel_matrix(const DenseMatrix& a, const DenseMatrix& b, double bandwidth,
                       DenseMatrix& out, double& sum);

}  // namespace opposd
