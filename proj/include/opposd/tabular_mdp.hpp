#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "opposd/common.hpp"
#include "opposd/matrix.hpp"

namespace opposd {

// Explicit finite MDP: transition[s][a][s'] flattened row-major, rewards
// r[s][a] in [0,1], gamma in (0,1], initial distribution p0.
struct TabularMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  VecD transition;  // s * (A*S) + a * S + s'
  VecD reward;      // s * A + a
  double gamma = 1.0;
  VecD initial_dist;

  double p(std::size_t s, std::size_t a, std::size_t sn) const {
    return transition[(s * n_actions + a) * n_states + sn];
  }
  double& p(std::size_t s, std::size_t a, std::size_t sn) {
    return transition[(s * n_actions + a) * n_states + sn];
  }
  double r(std::size_t s, std::size_t a) const { return reward[s * n_actions + a]; }
  double& r(std::size_t s, std::size_t a) { return reward[s * n_actions + a]; }

  // Throws NumericError when a stochasticity or range invariant is broken.
  void validate() const;

  std::string to_json() const;
  static TabularMdp from_json(const std::string& text);
};

struct PolicyTable {
  DenseMatrix probs;  // n_states x n_actions

  void validate() const;
  static PolicyTable uniform(std::size_t n_states, std::size_t n_actions);

  std::string to_json() const;
  static PolicyTable from_json(const std::string& text);
};

struct ValueResult {
  VecD v;         // per state
  DenseMatrix q;  // n_states x n_actions
};

// Solves V = r_pi + gamma P_pi V. For gamma < 1 this is one linear solve.
// For gamma = 1 the chain must be absorbing up to zero-reward recurrent
// classes; a recurrent class that carries reward is rejected.
ValueResult exact_value(const TabularMdp& mdp, const PolicyTable& policy);

// Expected (un-normalized) discounted return p0 . V. With normalize set,
// divides by sum_{t<horizon} gamma^t, matching the averaged-return
// convention.
double exact_return(const TabularMdp& mdp, const PolicyTable& policy,
                    bool normalize = false, std::size_t horizon = 200);

struct OccupancyResult {
  VecD d;               // normalized: sums to 1
  double discount_mass; // sum of gamma^t over the truncated range
  std::size_t steps;    // number of time steps accumulated
};

// Normalized discounted state occupancy sum_t gamma^t d_t / sum_t gamma^t.
// gamma < 1: iterate until gamma^t < 1e-10 (error past the iteration cap);
// gamma = 1: truncate at 10 * horizon steps.
OccupancyResult exact_occupancy(const TabularMdp& mdp, const PolicyTable& policy,
                                std::size_t horizon = 200);

// Differentiable policy family over a tabular MDP.
class PolicyFamily {
 public:
  virtual ~PolicyFamily() = default;
  virtual std::size_t param_count() const = 0;
  virtual PolicyTable policy(std::span<const double> theta) const = 0;
  // d pi(a|s) / d theta, as a dense vector over parameters.
  virtual VecD prob_grad(std::span<const double> theta, std::size_t s,
                         std::size_t a) const = 0;
};

// One logit per (state, action); pi(.|s) = softmax over the state's logits.
class TabularSoftmaxFamily : public PolicyFamily {
 public:
  TabularSoftmaxFamily(std::size_t n_states, std::size_t n_actions)
      : n_states_(n_states), n_actions_(n_actions) {}
  std::size_t param_count() const override { return n_states_ * n_actions_; }
  PolicyTable policy(std::span<const double> theta) const override;
  VecD prob_grad(std::span<const double> theta, std::size_t s,
                 std::size_t a) const override;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
};

// Gradient of the un-normalized expected return via the policy gradient
// theorem, assembled from exact occupancy and exact Q values.
VecD exact_policy_gradient(const TabularMdp& mdp, const PolicyFamily& family,
                           std::span<const double> theta, std::size_t horizon = 200);

// Same assembly but with the state expectation taken under the behavior
// policy's occupancy: the baseline estimator's target quantity.
VecD offpac_gradient_exact(const TabularMdp& mdp, const PolicyTable& behavior,
                           const PolicyFamily& family, std::span<const double> theta,
                           std::size_t horizon = 200);

struct SupportSets {
  std::vector<bool> state_in_support;            // d^mu(s) > tol
  std::vector<bool> sa_in_support;               // d^mu(s) mu(a|s) > tol, s*A+a
  bool contains(std::size_t s, std::size_t a, std::size_t n_actions) const {
    return sa_in_support[s * n_actions + a];
  }
};

SupportSets compute_support(const TabularMdp& mdp, const PolicyTable& behavior,
                            double support_tol = 1e-12, std::size_t horizon = 200);

struct AugmentedMdp {
  TabularMdp mdp;          // n_states + 1 states; the last one is absorbing
  std::size_t abs_state;   // == original n_states
  SupportSets support;     // over the original state/action space
};

// Out-of-support state-actions are redirected to a zero-reward absorbing
// state; rewards outside the support set are zeroed; in-support transitions
// are preserved.
AugmentedMdp build_augmented_mdp(const TabularMdp& mdp, const PolicyTable& behavior,
                                 double support_tol = 1e-12, std::size_t horizon = 200);

// Extends a policy over the original states with a uniform row for the
// appended absorbing state.
PolicyTable extend_policy(const PolicyTable& policy, std::size_t n_actions);

}  // namespace opposd
