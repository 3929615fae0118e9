#pragma once

// Deterministic cart-pole balancing environment: a pole hinged on a cart that
// is pushed left or right with a fixed-magnitude force, integrated with an
// explicit Euler step. Reward is +1 per step (including the terminating one),
// so the episode reward equals its length.

#include <cstdint>
#include <optional>

#include "horeg/rng.hpp"
#include "horeg/types.hpp"

namespace horeg::cartpole {

struct CartPoleState {
  double x = 0.0;          // cart position (m)
  double x_dot = 0.0;      // cart velocity (m/s)
  double theta = 0.0;      // pole angle (rad), 0 = upright
  double theta_dot = 0.0;  // pole angular velocity (rad/s)
};

inline Eigen::Vector4d to_vector(const CartPoleState& s) {
  return {s.x, s.x_dot, s.theta, s.theta_dot};
}

struct CartPoleParams {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double pole_half_length = 0.5;
  double force_magnitude = 10.0;
  double tau = 0.02;                      // Euler step (s)
  double angle_limit = 0.20943951023931953;  // 12 degrees in rad
  double position_limit = 2.4;
  std::optional<long> step_cap;           // episode length cap

  static CartPoleParams capped() {
    CartPoleParams p;
    p.step_cap = 200;
    return p;
  }
  // "Uncapped" still carries a safety cap so a converged policy cannot stall
  // the harness; the value is configurable.
  static CartPoleParams uncapped(long safety_cap = 2000) {
    CartPoleParams p;
    p.step_cap = safety_cap;
    return p;
  }
};

/// One explicit Euler step of the cart-pole dynamics under a horizontal force:
/// accelerations from the current state, positions advanced with the old
/// velocities (x ← x + τẋ, ẋ ← ẋ + τẍ, likewise for θ).
CartPoleState euler_step(const CartPoleState& s, double force, const CartPoleParams& p);

struct StepResult {
  CartPoleState state;
  double reward = 0.0;
  bool terminal = false;
};

class CartPole {
 public:
  CartPole(CartPoleParams params, std::uint64_t seed)
      : params_(params), rng_(seed), terminal_(true) {}

  /// Start an episode: all four components i.i.d. uniform(−0.05, 0.05).
  CartPoleState reset();

  /// Push left (0) or right (1). Terminal when |θ| or |x| leaves its limit or
  /// the step counter reaches the cap. Throws StepAfterTerminal if called on
  /// a finished episode.
  StepResult step(int action);

  const CartPoleState& state() const noexcept { return state_; }
  const CartPoleParams& params() const noexcept { return params_; }
  long steps() const noexcept { return steps_; }
  bool terminal() const noexcept { return terminal_; }

  /// Place the cart-pole in an arbitrary live state (step counter unchanged).
  void set_state(const CartPoleState& s) {
    state_ = s;
    terminal_ = false;
  }

 private:
  CartPoleParams params_;
  Rng rng_;
  CartPoleState state_;
  long steps_ = 0;
  bool terminal_;
};

}  // namespace horeg::cartpole
