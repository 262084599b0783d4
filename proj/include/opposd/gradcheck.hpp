#pragma once

#include <functional>
#include <span>

#include "opposd/mlp.hpp"

namespace opposd {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::size_t checked = 0;
  bool pass = false;
};

// Compares `analytic` against central finite differences of `loss` with
// respect to the values behind `params`. Relative error uses
// |a - n| / max(|a| + |n|, 1e-8) so that exactly-zero gradients compare
// cleanly.
GradCheckReport check_gradients(std::span<double* const> params,
                                std::span<const double> analytic,
                                const std::function<double()>& loss,
                                double step = 1e-5, double tolerance = 1e-4);

// Convenience wrapper for a full model: loss_and_grads must evaluate the
// scalar loss at the current parameters and return its analytic gradients.
GradCheckReport gradient_check(MlpParams& model,
                               const std::function<std::pair<double, MlpGradients>()>& loss_and_grads,
                               double tolerance = 1e-4, double step = 1e-5);

}  // namespace opposd
