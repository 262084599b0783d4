#include "opposd/cartpole.hpp"

#include <cmath>

namespace opposd {

using namespace cartpole;

bool cartpole_done(const CartPoleState& s) {
  return std::fabs(s.cart_position) > kPositionThreshold ||
         std::fabs(s.pole_angle) > kAngleThreshold;
}

CartPoleStepResult cartpole_step(const CartPoleState& state, int action) {
  const double force = (action == kRight) ? kForceMag : -kForceMag;
  const double cos_t = std::cos(state.pole_angle);
  const double sin_t = std::sin(state.pole_angle);
  const double omega = state.pole_angular_velocity;

  const double temp = (force + kPoleMassLength * omega * omega * sin_t) / kTotalMass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) /
      (kHalfPoleLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

  CartPoleStepResult out;
  out.next.cart_position = state.cart_position + kTau * state.cart_velocity;
  out.next.cart_velocity = state.cart_velocity + kTau * x_acc;
  out.next.pole_angle = state.pole_angle + kTau * omega;
  out.next.pole_angular_velocity = omega + kTau * theta_acc;
  out.reward = 1.0;
  out.done = cartpole_done(out.next);
  return out;
}

CartPoleState cartpole_reset(Rng& rng) {
  CartPoleState s;
  s.cart_position = rng.uniform(-0.05, 0.05);
  s.cart_velocity = rng.uniform(-0.05, 0.05);
  s.pole_angle = rng.uniform(-0.05, 0.05);
  s.pole_angular_velocity = rng.uniform(-0.05, 0.05);
  return s;
}

}  // namespace opposd
