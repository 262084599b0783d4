#include "opposd/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "opposd/dataset.hpp"
#include "opposd/model_input.hpp"

namespace opposd {

double rbf_kernel(std::span<const double> x, std::span<const double> y, double bandwidth) {
  if (x.size() != y.size()) throw NumericError("rbf_kernel: dimension mismatch");
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    d2 += diff * diff;
  }
  return std::exp(-d2 / (2.0 * bandwidth * bandwidth));
}

double median_bandwidth(const DenseMatrix& states, std::size_t max_points) {
  const std::size_t n = std::min(states.rows, max_points);
  if (n < 2) throw NumericError("median_bandwidth: need at least 2 points");
  VecD dists;
  dists.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = states.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* xj = states.row(j);
      double d2 = 0.0;
      for (std::size_t k = 0; k < states.cols; ++k) {
        const double diff = xi[k] - xj[k];
        d2 += diff * diff;
      }
      dists.push_back(std::sqrt(d2));
    }
  }
  std::sort(dists.begin(), dists.end());
  const std::size_t m = dists.size();
  const double median = (m % 2 == 1) ? dists[m / 2]
                                     : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
  if (median <= 0.0) return 1.0;  // degenerate sample
  return median;
}

void rbf_kernel_matrix(const DenseMatrix& a, const DenseMatrix& b, double bandwidth,
                       DenseMatrix& out, double& sum) {
  if (a.cols != b.cols) throw NumericError("rbf_kernel_matrix: dimension mismatch");
  out.rows = a.rows;
  out.cols = b.rows;
  out.data.resize(a.rows * b.rows);
  const double inv = -1.0 / (2.0 * bandwidth * bandwidth);
  const std::size_t d = a.cols;
  sum = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* xi = a.row(i);
    double* orow = out.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* xj = b.row(j);
      double d2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = xi[k] - xj[k];
        d2 += diff * diff;
      }
      const double v = std::exp(inv * d2);
      orow[j] = v;
      sum += v;
    }
  }
}

NormalizationStats normalization_for_adapter(const Dataset& data,
                                             const DenseMatrix& feature_map) {
  const std::size_t d = feature_map.empty() ? data.state_dim : feature_map.cols;
  VecD mean(d, 0.0), m2(d, 0.0);
  VecD mapped(d);
  std::size_t count = 0;
  for (const Trajectory& tr : data.trajectories) {
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
      if (tr.state_is_abs[t]) continue;
      const VecD& s = tr.states[t];
      if (feature_map.empty()) {
        std::copy(s.begin(), s.end(), mapped.begin());
      } else {
        std::fill(mapped.begin(), mapped.end(), 0.0);
        for (std::size_t i = 0; i < s.size(); ++i) {
          if (s[i] == 0.0) continue;
          for (std::size_t j = 0; j < d; ++j) mapped[j] += s[i] * feature_map(i, j);
        }
      }
      ++count;
      for (std::size_t j = 0; j < d; ++j) {
        mean[j] += mapped[j];
        m2[j] += mapped[j] * mapped[j];
      }
    }
  }
  if (count == 0) throw NumericError("normalization_for_adapter: no states");
  NormalizationStats stats;
  stats.mean.resize(d);
  stats.std.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    stats.mean[j] = mean[j] / static_cast<double>(count);
    const double var =
        std::max(m2[j] / static_cast<double>(count) - stats.mean[j] * stats.mean[j], 0.0);
    stats.std[j] = std::max(std::sqrt(var), 1e-6);
  }
  return stats;
}

}  // namespace opposd
