#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "opposd/common.hpp"
#include "opposd/env.hpp"
#include "opposd/matrix.hpp"

namespace opposd {

// One logged step. This is a materialized view; trajectories store parallel
// arrays internally.
struct Transition {
  VecD state;
  int action = 0;
  double reward = 0.0;
  VecD next_state;
  double behavior_prob = 1.0;
  std::size_t timestep = 0;
  bool is_absorbing = false;  // reward 0 and next_state is the sentinel
  bool state_is_abs = false;  // the state itself is the sentinel
  bool in_support = false;    // logged under mu (not injected by smoothing)
  bool is_padding = false;    // synthesized after episode termination
};

// Fixed-horizon trajectory. states has horizon+1 entries and
// states[t+1] == next state of transition t, including sentinel self-loops.
struct Trajectory {
  std::vector<VecD> states;
  std::vector<std::uint8_t> state_is_abs;  // horizon + 1 flags
  std::vector<int> actions;
  VecD rewards;
  VecD behavior_probs;
  std::vector<std::uint8_t> is_absorbing;
  std::vector<std::uint8_t> in_support;
  std::vector<std::uint8_t> is_padding;

  std::size_t length() const { return actions.size(); }
  Transition transition_at(std::size_t t) const;
  double total_reward() const;
};

struct NormalizationStats {
  VecD mean;
  VecD std;

  bool empty() const { return mean.empty(); }
  void apply_row(const double* in, double* out, std::size_t d) const {
    for (std::size_t j = 0; j < d; ++j) out[j] = (in[j] - mean[j]) / std[j];
  }
  VecD apply(const VecD& x) const {
    VecD out(x.size());
    apply_row(x.data(), out.data(), x.size());
    return out;
  }
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  std::size_t horizon = 0;
  std::size_t n_actions = 0;
  std::size_t state_dim = 0;
  double smoothing_epsilon = 0.0;
  NormalizationStats normalization;

  std::size_t n_trajectories() const { return trajectories.size(); }
  std::size_t n_transitions() const { return trajectories.size() * horizon; }
  void validate() const;
};

struct TransitionRef {
  std::uint32_t traj = 0;
  std::uint32_t step = 0;
};

// Gathered batch in structure-of-arrays form; states are canonical
// (un-normalized).
struct MiniBatch {
  DenseMatrix states;
  DenseMatrix next_states;
  std::vector<int> actions;
  VecD rewards;
  VecD behavior_probs;
  std::vector<std::size_t> timesteps;
  std::vector<std::uint8_t> is_absorbing;
  std::vector<std::uint8_t> state_is_abs;
  std::vector<std::uint8_t> in_support;
  std::vector<TransitionRef> refs;

  std::size_t size() const { return actions.size(); }
};

MiniBatch gather(const Dataset& data, std::span<const TransitionRef> refs);

// Runs the behavior policy for exactly `horizon` steps per episode. Episodes
// that terminate early are padded by repeating the final state while actions
// continue to be sampled; padded rewards are 0.
Dataset collect_dataset(Environment& env, const StochasticPolicy& behavior,
                        std::size_t n_trajectories, std::size_t horizon, Rng& rng);

// Realizes the smoothed behavior policy over actions the logged policy never
// takes: at states with k > 0 zero-probability actions each logged sample is
// kept with probability 1-eps (propensity scaled by 1-eps) or replaced by a
// uniform draw over those k actions routed to the absorbing sentinel, with
// the rest of the trajectory turned into sentinel self-loops.
Dataset epsilon_smooth(const Dataset& data, const StochasticPolicy& behavior_spec,
                       double epsilon, Rng& rng);

// Per-dimension moments over all non-sentinel states; std floored at 1e-6.
NormalizationStats compute_normalization(const Dataset& data);

// Timestep weights gamma^t / sum_{u<horizon} gamma^u.
struct DiscountedSampler {
  double gamma = 1.0;
  VecD weights;
  VecD cdf;

  std::size_t sample_timestep(Rng& rng) const;
};

DiscountedSampler make_discounted_sampler(double gamma, std::size_t horizon);

// Trajectory uniform, timestep ~ gamma^t.
std::vector<TransitionRef> sample_minibatch_dgamma(const Dataset& data,
                                                   const DiscountedSampler& sampler,
                                                   std::size_t batch_size, Rng& rng);

// t=0 states of uniformly drawn trajectories.
DenseMatrix sample_initial_states(const Dataset& data, std::size_t count, Rng& rng);

void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace opposd
