#pragma once

#include "opposd/common.hpp"

namespace opposd {

struct CartPoleState {
  double cart_position = 0.0;
  double cart_velocity = 0.0;
  double pole_angle = 0.0;
  double pole_angular_velocity = 0.0;
};

// Classic control constants (CartPole-v0 reference values).
namespace cartpole {
constexpr double kGravity = 9.8;
constexpr double kMassCart = 1.0;
constexpr double kMassPole = 0.1;
constexpr double kTotalMass = kMassCart + kMassPole;
constexpr double kHalfPoleLength = 0.5;
constexpr double kPoleMassLength = kMassPole * kHalfPoleLength;
constexpr double kForceMag = 10.0;
constexpr double kTau = 0.02;
constexpr double kAngleThreshold = 12.0 * 3.14159265358979323846 / 180.0;
constexpr double kPositionThreshold = 2.4;
constexpr int kLeft = 0;
constexpr int kRight = 1;
}  // namespace cartpole

struct CartPoleStepResult {
  CartPoleState next;
  double reward = 1.0;  // granted on every step, including the terminating one
  bool done = false;
};

// One Euler step of the cart-pole dynamics; action 0 pushes left, 1 right.
CartPoleStepResult cartpole_step(const CartPoleState& state, int action);

// Each component uniform in [-0.05, 0.05].
CartPoleState cartpole_reset(Rng& rng);

bool cartpole_done(const CartPoleState& state);

}  // namespace opposd
