#pragma once

#include <memory>
#include <optional>

#include "opposd/adam.hpp"
#include "opposd/env.hpp"
#include "opposd/mlp.hpp"
#include "opposd/model_input.hpp"
#include "opposd/target_policy.hpp"

namespace opposd {

// Hard representation constraint: states for which the policy is pinned to a
// fixed distribution (their rows carry no gradient). Used to realize
// restricted tabular policy classes.
class PolicyConstraint {
 public:
  virtual ~PolicyConstraint() = default;
  virtual std::optional<VecD> fixed_probs(std::span<const double> canonical_state) const = 0;
};

struct ActorModel {
  MlpParams net;  // softmax head over actions
  AdamState opt;
  InputAdapter input;
  std::shared_ptr<const PolicyConstraint> constraint;  // may be null
};

ActorModel make_actor_model(const std::vector<std::size_t>& layer_sizes,
                            InputAdapter input, double lr, Rng& rng,
                            std::shared_ptr<const PolicyConstraint> constraint = nullptr);

// Action distributions, constraint rows overridden.
DenseMatrix actor_probs(const ActorModel& actor, const DenseMatrix& canonical_states);

// Adapters wiring the actor into the TargetPolicy / StochasticPolicy
// surfaces used by the critic, ratio model, simulators and evaluation.
class ActorTargetPolicy final : public TargetPolicy {
 public:
  explicit ActorTargetPolicy(const ActorModel& actor) : actor_(&actor) {}
  DenseMatrix action_probs(const DenseMatrix& canonical_states) const override;

 private:
  const ActorModel* actor_;
};

class ActorAsPolicy final : public StochasticPolicy {
 public:
  explicit ActorAsPolicy(const ActorModel& actor) : actor_(&actor) {}
  VecD action_probs(const VecD& state) const override;

 private:
  const ActorModel* actor_;
};

// Negative log-likelihood of the logged actions, Adam-minimized in
// mini-batches. Sentinel and constraint rows are excluded from the loss.
// Returns the final mini-batch NLL.
double behavior_clone(ActorModel& actor, const Dataset& data, std::size_t iterations,
                      std::size_t batch_size, Rng& rng);

struct ActorGradResult {
  MlpGradients ascent;   // gradient of the objective (ascent direction)
  double z_w = 1.0;
  double entropy_mean = 0.0;
  double grad_norm = 0.0;
};

// State-distribution-corrected policy gradient estimate on one mini-batch:
//   mean_i (w_i / z_w) rho_i  d log pi(a_i|s_i)  Q_i  +  c_H d mean entropy,
// with z_w the in-batch mean of w. Pass an empty w span for the uncorrected
// (w == 1) baseline estimator.
ActorGradResult actor_gradient(const ActorModel& actor, const MiniBatch& batch,
                               std::span<const double> w_values,
                               std::span<const double> q_values,
                               double entropy_coefficient);

// Baseline estimator: identical pipeline with the ratio factor removed.
ActorGradResult offpac_actor_gradient(const ActorModel& actor, const MiniBatch& batch,
                                      std::span<const double> q_values,
                                      double entropy_coefficient);

}  // namespace opposd
