#include "opposd/adam.hpp"

#include <cmath>

namespace opposd {

AdamState make_adam(const MlpParams& params, double learning_rate, double weight_decay) {
  AdamState s;
  s.learning_rate = learning_rate;
  s.weight_decay = weight_decay;
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    s.first_moment.emplace_back(params.weights[l].rows, params.weights[l].cols, 0.0);
    s.first_moment.emplace_back(1, params.biases[l].cols, 0.0);
    s.second_moment.emplace_back(params.weights[l].rows, params.weights[l].cols, 0.0);
    s.second_moment.emplace_back(1, params.biases[l].cols, 0.0);
  }
  return s;
}

namespace {

void update_block(AdamState& s, std::size_t block, DenseMatrix& param,
                  const DenseMatrix& grad, double bc1, double bc2) {
  DenseMatrix& m = s.first_moment[block];
  DenseMatrix& v = s.second_moment[block];
  for (std::size_t k = 0; k < param.data.size(); ++k) {
    double g = grad.data[k];
    if (!std::isfinite(g)) {
      throw NumericError("adam_step: non-finite gradient at block " +
                         std::to_string(block) + " index " + std::to_string(k));
    }
    g += s.weight_decay * param.data[k];
    m.data[k] = s.beta1 * m.data[k] + (1.0 - s.beta1) * g;
    v.data[k] = s.beta2 * v.data[k] + (1.0 - s.beta2) * g * g;
    const double mhat = m.data[k] / bc1;
    const double vhat = v.data[k] / bc2;
    param.data[k] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.eps_stability);
  }
}

}  // namespace

void adam_step(AdamState& state, MlpParams& params, const MlpGradients& grads) {
  if (state.first_moment.size() != 2 * params.n_layers()) {
    throw NumericError("adam_step: optimizer state does not match parameters");
  }
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  for (std::size_t l = 0; l < params.n_layers(); ++l) {
    update_block(state, 2 * l, params.weights[l], grads.d_weights[l], bc1, bc2);
    update_block(state, 2 * l + 1, params.biases[l], grads.d_biases[l], bc1, bc2);
  }
}

}  // namespace opposd
