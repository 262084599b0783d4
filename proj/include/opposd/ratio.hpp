#pragma once

#include "opposd/adam.hpp"
#include "opposd/kernel.hpp"
#include "opposd/mlp.hpp"
#include "opposd/model_input.hpp"
#include "opposd/target_policy.hpp"

namespace opposd {

// Parametric state-distribution ratio w(s) >= 0 (softplus head, scalar
// output) with its optimizer and kernel configuration.
struct RatioModel {
  MlpParams net;
  AdamState opt;
  InputAdapter input;
  KernelConfig kernel;
  double bandwidth = 1.0;  // resolved value actually used
};

RatioModel make_ratio_model(const std::vector<std::size_t>& layer_sizes,
                            InputAdapter input, KernelConfig kernel, double lr,
                            double weight_decay, Rng& rng);

// Resolves the median-heuristic bandwidth on an evenly strided subsample of
// the dataset's (adapter-transformed) states. Fixed mode returns the
// configured value.
double resolve_bandwidth(const KernelConfig& kernel, const InputAdapter& input,
                         const Dataset& data, std::size_t max_points = 1000);

// w evaluated on canonical states.
VecD ratio_values(const RatioModel& model, const DenseMatrix& canonical_states);

// Elementwise w(s) rho - w(s').
VecD delta(std::span<const double> w_values, std::span<const double> rho_values,
           std::span<const double> w_next_values);

// Two independently drawn (disjoint) mini-batches plus initial-state samples
// and the target-policy propensities for each row.
struct RatioBatch {
  MiniBatch b1, b2;
  DenseMatrix init1, init2;      // canonical t=0 states
  VecD target_probs1, target_probs2;
};

RatioBatch sample_ratio_batch(const Dataset& data, const DiscountedSampler& sampler,
                              std::size_t batch_size, const TargetPolicy& target,
                              Rng& rng);

struct RatioLossResult {
  double loss = 0.0;
  MlpGradients grads;
};

// Closed-form RKHS norm of the ratio-matching residual operator, estimated
// with cross-batch pairs only and per-term kernel-sum normalization:
//   gamma^2 E[D D' k(s',s̄')] + (1-gamma)^2 E[(1-w(s0))(1-w(s̄0)) k(s0,s̄0)]
//   + 2 gamma (1-gamma) E[D (1-w(s̄0)) k(s',s̄0)]
RatioLossResult ratio_loss_discounted(const RatioModel& model, const RatioBatch& batch,
                                      double gamma);

// Average-reward variant: same first term with in-batch self-normalized
// weights w / mean(w); exactly invariant to positive rescaling of w.
RatioLossResult ratio_loss_average(const RatioModel& model, const RatioBatch& batch);

// One Adam step on the selected loss; returns the loss value.
double ratio_update_step(RatioModel& model, const Dataset& data,
                         const DiscountedSampler& sampler, std::size_t batch_size,
                         const TargetPolicy& target, bool discounted_variant,
                         double gamma, Rng& rng);

// Exact occupancy ratio d^pi / d^mu on a tabular instance. States carrying
// no mass under either policy map to 0; target mass on a state the behavior
// policy never visits is a coverage violation.
VecD exact_ratio_tabular(const TabularMdp& mdp, const PolicyTable& target,
                         const PolicyTable& behavior, std::size_t horizon = 200);

}  // namespace opposd
