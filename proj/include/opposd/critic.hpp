#pragma once

#include "opposd/adam.hpp"
#include "opposd/mlp.hpp"
#include "opposd/model_input.hpp"
#include "opposd/target_policy.hpp"

namespace opposd {

struct CriticModel {
  MlpParams net;  // linear scalar head
  AdamState opt;
  InputAdapter input;
};

CriticModel make_critic_model(const std::vector<std::size_t>& layer_sizes,
                              InputAdapter input, double lr, Rng& rng);

VecD critic_values(const CriticModel& model, const DenseMatrix& canonical_states);

// Off-policy lambda-returns along one trajectory, backward recursion
//   R_t = r_t + (1-lambda) gamma Vnext_t + lambda gamma rho_{t+1} R_{t+1}
// with R at the horizon set to 0. Absorbing steps yield exactly 0;
// bootstrap values on absorbing steps are masked. Ratios inside the
// recursion are clipped at rho_clip; the leading critic-loss weight is not.
VecD lambda_returns(const Trajectory& tr, std::span<const double> critic_next_values,
                    std::span<const double> target_probs, double lambda, double gamma,
                    double rho_clip = 10.0);

struct CriticLossResult {
  double loss = 0.0;
  MlpGradients grads;
};

// l_c = mean_i rho_i (R_i - V(s_i))^2; the returns are plain numbers here,
// so no gradient flows through the bootstrap by construction.
CriticLossResult critic_loss(const CriticModel& model, const MiniBatch& batch,
                             std::span<const double> rho_lead,
                             std::span<const double> returns);

// Q(s,a) = R_lambda if the pair was logged under mu, else 0.
VecD masked_q(const MiniBatch& batch, std::span<const double> returns);

struct CriticRoundConfig {
  std::size_t n_iters = 10;
  std::size_t batch_size = 5000;
  double lambda = 0.0;
  double gamma = 1.0;
  double rho_clip = 10.0;
};

// N_c Adam steps on fresh uniform mini-batches. Targets come from a snapshot
// of the network taken at the start of the round. Returns the mean loss.
double critic_update_round(CriticModel& model, const Dataset& data,
                           const TargetPolicy& target, const CriticRoundConfig& config,
                           Rng& rng);

// Same update with rho == 1 everywhere (on-policy regression onto the
// logged returns), used to warm-start from the behavior policy's data.
double warm_start_critic(CriticModel& model, const Dataset& data, std::size_t iterations,
                         const CriticRoundConfig& config, Rng& rng);

// Lambda-returns for selected batch rows, computed against a frozen network.
// Exposed for the actor update (which pairs returns with its own batch) and
// for tests. `target` may be null only with on_policy_rho set.
VecD batch_lambda_returns(const MlpParams& frozen_net, const InputAdapter& input,
                          const Dataset& data, const MiniBatch& batch,
                          const TargetPolicy* target, double lambda, double gamma,
                          double rho_clip, bool on_policy_rho = false);

}  // namespace opposd
