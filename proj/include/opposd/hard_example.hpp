#pragma once

#include <memory>

#include "opposd/actor.hpp"
#include "opposd/tabular_mdp.hpp"

namespace opposd {

// Six-state episodic instance where a behavior-occupancy-weighted gradient
// vanishes for the whole one-parameter policy class while the true gradient
// stays strictly positive.
//
// States: s0, s1, s2, s3, s4, T; actions: left(0), right(1); gamma = 1.
//   s0: left -> s1, right -> s2, reward 0
//   s1: left -> s3; right -> s3 or s4 with prob 1/2 each; reward 0
//   s2: left -> s4; right -> s3 or s4 with prob 1/2 each; reward 0
//   s3: both actions -> T with reward 1
//   s4: both actions -> T with reward 0
//   T : absorbing, reward 0
// Start state s0; the policy class fixes left everywhere except s1/s2 where
// pi(left|s1) = pi(left|s2) = alpha.
namespace hard_example {

constexpr std::size_t kS0 = 0;
constexpr std::size_t kS1 = 1;
constexpr std::size_t kS2 = 2;
constexpr std::size_t kS3 = 3;
constexpr std::size_t kS4 = 4;
constexpr std::size_t kTerminal = 5;
constexpr std::size_t kNumStates = 6;
constexpr int kLeft = 0;
constexpr int kRight = 1;
constexpr std::size_t kHorizon = 4;  // episodes absorb after 3 transitions

}  // namespace hard_example

struct HardExampleFamily {
  TabularMdp mdp;
  PolicyTable behavior;  // uniform everywhere

  PolicyTable policy_alpha(double alpha) const;
};

HardExampleFamily hard_example_mdp();

// The single-parameter family itself: theta = {alpha}, alpha in [0,1].
class HardExampleAlphaFamily : public PolicyFamily {
 public:
  std::size_t param_count() const override { return 1; }
  PolicyTable policy(std::span<const double> theta) const override;
  VecD prob_grad(std::span<const double> theta, std::size_t s,
                 std::size_t a) const override;
};

// Feature view used when training function-approximation policies on this
// instance: s1/s2 share a column (the shared trainable parameter) and s3/s4
// share a column (state aliasing). 6 states -> 4 features.
DenseMatrix hard_example_actor_feature_map();

// Pins the policy to `left` everywhere except the shared s1/s2 parameter,
// so a trained actor ranges exactly over the single-parameter class.
std::shared_ptr<const PolicyConstraint> hard_example_policy_constraint();

}  // namespace opposd
