#include "horeg/cartpole.hpp"

#include <cmath>

#include "horeg/errors.hpp"

namespace horeg::cartpole {

CartPoleState euler_step(const CartPoleState& s, double force, const CartPoleParams& p) {
  const double total_mass = p.cart_mass + p.pole_mass;
  const double pole_mass_length = p.pole_mass * p.pole_half_length;
  const double cos_theta = std::cos(s.theta);
  const double sin_theta = std::sin(s.theta);

  const double temp =
      (force + pole_mass_length * s.theta_dot * s.theta_dot * sin_theta) / total_mass;
  const double theta_acc =
      (p.gravity * sin_theta - cos_theta * temp) /
      (p.pole_half_length * (4.0 / 3.0 - p.pole_mass * cos_theta * cos_theta / total_mass));
  const double x_acc = temp - pole_mass_length * theta_acc * cos_theta / total_mass;

  CartPoleState next;
  next.x = s.x + p.tau * s.x_dot;
  next.x_dot = s.x_dot + p.tau * x_acc;
  next.theta = s.theta + p.tau * s.theta_dot;
  next.theta_dot = s.theta_dot + p.tau * theta_acc;
  return next;
}

CartPoleState CartPole::reset() {
  state_.x = rng_.uniform(-0.05, 0.05);
  state_.x_dot = rng_.uniform(-0.05, 0.05);
  state_.theta = rng_.uniform(-0.05, 0.05);
  state_.theta_dot = rng_.uniform(-0.05, 0.05);
  steps_ = 0;
  terminal_ = false;
  return state_;
}

StepResult CartPole::step(int action) {
  if (terminal_) throw StepAfterTerminal("step() on a terminated episode (reset first)");
  if (action != 0 && action != 1) throw Error("cart-pole action must be 0 or 1");

  const double force = action == 1 ? params_.force_magnitude : -params_.force_magnitude;
  state_ = euler_step(state_, force, params_);
  ++steps_;

  const bool out_of_bounds = std::abs(state_.theta) > params_.angle_limit ||
                             std::abs(state_.x) > params_.position_limit;
  const bool capped = params_.step_cap && steps_ >= *params_.step_cap;
  terminal_ = out_of_bounds || capped;
  return {state_, 1.0, terminal_};
}

}  // namespace horeg::cartpole
