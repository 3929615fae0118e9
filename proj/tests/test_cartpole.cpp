#include <doctest.h>

#include <cmath>
#include <vector>

#include "horeg/cartpole.hpp"
#include "horeg/errors.hpp"

using namespace horeg;
using cartpole::CartPole;
using cartpole::CartPoleParams;
using cartpole::CartPoleState;

TEST_CASE("euler step matches the hand-evaluated dynamics") {
  // Centered state, push right: temp = 10/1.1, theta_acc = -600/41,
  // x_acc = temp - 0.05*theta_acc/1.1 = 400/41; positions keep old velocities.
  const CartPoleParams p;
  const CartPoleState next = cartpole::euler_step({0, 0, 0, 0}, 10.0, p);
  CHECK(next.x == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(next.theta == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(next.x_dot == doctest::Approx(0.02 * 400.0 / 41.0).epsilon(1e-12));
  CHECK(next.theta_dot == doctest::Approx(0.02 * -600.0 / 41.0).epsilon(1e-12));

  SUBCASE("pushing left mirrors the signs") {
    const CartPoleState left = cartpole::euler_step({0, 0, 0, 0}, -10.0, p);
    CHECK(left.x_dot == doctest::Approx(-next.x_dot).epsilon(1e-14));
    CHECK(left.theta_dot == doctest::Approx(-next.theta_dot).epsilon(1e-14));
  }
}

TEST_CASE("reset") {
  SUBCASE("all components inside (-0.05, 0.05)") {
    CartPole env(CartPoleParams::capped(), 5);
    for (int i = 0; i < 100; ++i) {
      const CartPoleState s = env.reset();
      CHECK(std::abs(s.x) < 0.05);
      CHECK(std::abs(s.x_dot) < 0.05);
      CHECK(std::abs(s.theta) < 0.05);
      CHECK(std::abs(s.theta_dot) < 0.05);
    }
  }
  SUBCASE("identically seeded environments reset identically") {
    CartPole a(CartPoleParams::capped(), 17);
    CartPole b(CartPoleParams::capped(), 17);
    const CartPoleState sa = a.reset();
    const CartPoleState sb = b.reset();
    CHECK(sa.x == sb.x);
    CHECK(sa.x_dot == sb.x_dot);
    CHECK(sa.theta == sb.theta);
    CHECK(sa.theta_dot == sb.theta_dot);
  }
  SUBCASE("component means concentrate near zero") {
    CartPole env(CartPoleParams::capped(), 23);
    double sum_x = 0, sum_xd = 0, sum_t = 0, sum_td = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const CartPoleState s = env.reset();
      sum_x += s.x;
      sum_xd += s.x_dot;
      sum_t += s.theta;
      sum_td += s.theta_dot;
    }
    CHECK(std::abs(sum_x / n) < 0.005);
    CHECK(std::abs(sum_xd / n) < 0.005);
    CHECK(std::abs(sum_t / n) < 0.005);
    CHECK(std::abs(sum_td / n) < 0.005);
  }
}

TEST_CASE("step") {
  SUBCASE("boundary crossing terminates") {
    CartPole env(CartPoleParams::capped(), 1);
    env.reset();
    env.set_state({2.39, 10.0, 0.0, 0.0});
    const auto res = env.step(1);
    CHECK(res.terminal);
    CHECK(res.reward == 1.0);
    CHECK(res.state.x > 2.4);
  }
  SUBCASE("stepping a finished episode throws") {
    CartPole env(CartPoleParams::capped(), 1);
    env.reset();
    env.set_state({2.39, 10.0, 0.0, 0.0});
    env.step(1);
    CHECK_THROWS_AS(env.step(0), StepAfterTerminal);
  }
  SUBCASE("stepping before the first reset throws") {
    CartPole env(CartPoleParams::capped(), 1);
    CHECK_THROWS_AS(env.step(0), StepAfterTerminal);
  }
  SUBCASE("alternating actions from the centered state stay up a while") {
    // Independent simulation of the same equations gives exactly 33 steps.
    CartPole env(CartPoleParams::uncapped(), 2);
    env.reset();
    env.set_state({0, 0, 0, 0});
    long steps = 0;
    while (!env.terminal() && steps < 2000) {
      env.step(static_cast<int>(steps % 2));
      ++steps;
    }
    CHECK(steps == 33);
  }
  SUBCASE("step cap terminates with reward equal to the cap") {
    CartPoleParams p = CartPoleParams::capped();
    p.step_cap = 5;
    CartPole env(p, 3);
    env.reset();
    env.set_state({0, 0, 0, 0});
    double total = 0.0;
    bool terminal = false;
    long steps = 0;
    while (!terminal) {
      const auto res = env.step(static_cast<int>(steps % 2));
      total += res.reward;
      terminal = res.terminal;
      ++steps;
    }
    CHECK(steps == 5);
    CHECK(total == 5.0);
  }
}

TEST_CASE("trajectories are deterministic and rewards count steps") {
  auto roll = [](std::uint64_t seed) {
    CartPole env(CartPoleParams::capped(), seed);
    env.reset();
    std::vector<double> xs;
    double total = 0.0;
    long steps = 0;
    bool terminal = false;
    while (!terminal) {
      const auto res = env.step(static_cast<int>((steps / 3) % 2));
      xs.push_back(res.state.x);
      xs.push_back(res.state.theta);
      total += res.reward;
      terminal = res.terminal;
      ++steps;
      // Termination must be reported the moment a bound is exceeded.
      if (!terminal) {
        CHECK(std::abs(res.state.theta) <= env.params().angle_limit);
        CHECK(std::abs(res.state.x) <= env.params().position_limit);
      }
    }
    CHECK(total == static_cast<double>(steps));
    CHECK(steps <= 200);
    return xs;
  };
  const auto a = roll(31);
  const auto b = roll(31);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("small oscillations match the linearized pendulum period") {
  // Hanging configuration: flip gravity, remove the force, widen the limits.
  CartPoleParams p;
  p.gravity = -9.8;
  p.force_magnitude = 0.0;
  p.angle_limit = 3.2;
  p.position_limit = 100.0;
  p.step_cap = 4000;
  CartPole env(p, 4);
  env.reset();
  env.set_state({0, 0, 0.05, 0});

  // theta'' = g·theta / (l(4/3 − m_p/(m_c+m_p))) at small angles.
  const double omega2 =
      9.8 / (p.pole_half_length * (4.0 / 3.0 - p.pole_mass / (p.cart_mass + p.pole_mass)));
  const double period = 2.0 * 3.14159265358979323846 / std::sqrt(omega2);

  std::vector<long> upward_crossings;
  double prev_theta = 0.05;
  for (long t = 1; t <= 400; ++t) {
    const auto res = env.step(0);
    if (prev_theta < 0.0 && res.state.theta >= 0.0) upward_crossings.push_back(t);
    prev_theta = res.state.theta;
    if (upward_crossings.size() >= 2) break;
  }
  REQUIRE(upward_crossings.size() >= 2);
  const double measured = (upward_crossings[1] - upward_crossings[0]) * p.tau;
  CHECK(std::abs(measured - period) / period < 0.05);
}
