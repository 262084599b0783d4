#include "opposd/env.hpp"

#include <algorithm>

namespace opposd {

VecD CartPoleEnv::reset(Rng& rng) {
  const CartPoleState s = cartpole_reset(rng);
  return {s.cart_position, s.cart_velocity, s.pole_angle, s.pole_angular_velocity};
}

StepOutcome CartPoleEnv::step(const VecD& state, int action, Rng& rng) {
  (void)rng;  // dynamics are deterministic
  CartPoleState s;
  s.cart_position = state[0];
  s.cart_velocity = state[1];
  s.pole_angle = state[2];
  s.pole_angular_velocity = state[3];
  const CartPoleStepResult r = cartpole_step(s, action);
  StepOutcome out;
  out.next_state = {r.next.cart_position, r.next.cart_velocity, r.next.pole_angle,
                    r.next.pole_angular_velocity};
  out.reward = r.reward;
  out.done = r.done;
  return out;
}

TabularEnv::TabularEnv(TabularMdp mdp) : mdp_(std::move(mdp)) { mdp_.validate(); }

VecD TabularEnv::features_of(std::size_t s) const {
  VecD f(mdp_.n_states, 0.0);
  f[s] = 1.0;
  return f;
}

std::size_t TabularEnv::state_index(std::span<const double> features) const {
  return static_cast<std::size_t>(
      std::max_element(features.begin(), features.end()) - features.begin());
}

VecD TabularEnv::reset(Rng& rng) {
  const int s = rng.categorical(mdp_.initial_dist);
  return features_of(static_cast<std::size_t>(s));
}

StepOutcome TabularEnv::step(const VecD& state, int action, Rng& rng) {
  const std::size_t s = state_index(state);
  std::span<const double> row(&mdp_.transition[(s * mdp_.n_actions + action) * mdp_.n_states],
                              mdp_.n_states);
  const int sn = rng.categorical(row);
  StepOutcome out;
  out.next_state = features_of(static_cast<std::size_t>(sn));
  out.reward = mdp_.r(s, static_cast<std::size_t>(action));
  out.done = false;
  return out;
}

std::vector<int> StochasticPolicy::zero_prob_actions(const VecD& state) const {
  const VecD probs = action_probs(state);
  std::vector<int> zeros;
  for (std::size_t a = 0; a < probs.size(); ++a) {
    if (probs[a] <= 0.0) zeros.push_back(static_cast<int>(a));
  }
  return zeros;
}

VecD UniformPolicy::action_probs(const VecD&) const {
  return VecD(n_actions_, 1.0 / static_cast<double>(n_actions_));
}

VecD TableLookupPolicy::action_probs(const VecD& state) const {
  const std::size_t s = static_cast<std::size_t>(
      std::max_element(state.begin(), state.end()) - state.begin());
  VecD probs(table_.probs.cols);
  for (std::size_t a = 0; a < probs.size(); ++a) probs[a] = table_.probs(s, a);
  return probs;
}

}  // namespace opposd
