#pragma once

#include <memory>
#include <optional>

#include "opposd/cartpole.hpp"
#include "opposd/common.hpp"
#include "opposd/tabular_mdp.hpp"

namespace opposd {

struct StepOutcome {
  VecD next_state;
  double reward = 0.0;
  bool done = false;
};

// Stateless simulator interface: the caller owns both the state vector and
// the RNG, so rollouts are trivially parallel across callers.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t n_actions() const = 0;
  virtual VecD reset(Rng& rng) = 0;
  virtual StepOutcome step(const VecD& state, int action, Rng& rng) = 0;
};

class CartPoleEnv final : public Environment {
 public:
  std::size_t state_dim() const override { return 4; }
  std::size_t n_actions() const override { return 2; }
  VecD reset(Rng& rng) override;
  StepOutcome step(const VecD& state, int action, Rng& rng) override;
};

// A tabular MDP exposed through one-hot state features. Never reports done:
// episodic structure is represented by absorbing states in the MDP itself.
class TabularEnv final : public Environment {
 public:
  explicit TabularEnv(TabularMdp mdp);
  std::size_t state_dim() const override { return mdp_.n_states; }
  std::size_t n_actions() const override { return mdp_.n_actions; }
  VecD reset(Rng& rng) override;
  StepOutcome step(const VecD& state, int action, Rng& rng) override;

  const TabularMdp& mdp() const { return mdp_; }
  VecD features_of(std::size_t s) const;
  std::size_t state_index(std::span<const double> features) const;

 private:
  TabularMdp mdp_;
};

class StochasticPolicy {
 public:
  virtual ~StochasticPolicy() = default;
  virtual VecD action_probs(const VecD& state) const = 0;
  // Actions this policy never takes in the given state.
  std::vector<int> zero_prob_actions(const VecD& state) const;
};

class UniformPolicy final : public StochasticPolicy {
 public:
  explicit UniformPolicy(std::size_t n_actions) : n_actions_(n_actions) {}
  VecD action_probs(const VecD& state) const override;

 private:
  std::size_t n_actions_;
};

// Policy table addressed by one-hot state features.
class TableLookupPolicy final : public StochasticPolicy {
 public:
  explicit TableLookupPolicy(PolicyTable table) : table_(std::move(table)) {}
  VecD action_probs(const VecD& state) const override;

 private:
  PolicyTable table_;
};

}  // namespace opposd
