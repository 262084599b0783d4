#pragma once

#include "opposd/mlp.hpp"

namespace opposd {

// Bias-corrected Adam with optional decoupled-from-nothing L2: weight decay
// is added to the gradient before the adaptive update.
struct AdamState {
  std::size_t step_count = 0;
  std::vector<DenseMatrix> first_moment;   // shaped like weights+biases, interleaved
  std::vector<DenseMatrix> second_moment;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_stability = 1e-8;
  double weight_decay = 0.0;
};

AdamState make_adam(const MlpParams& params, double learning_rate,
                    double weight_decay = 0.0);

// One update; gradients are for descent (callers doing ascent negate first).
// Throws NumericError on non-finite gradients.
void adam_step(AdamState& state, MlpParams& params, const MlpGradients& grads);

}  // namespace opposd
