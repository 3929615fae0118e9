#pragma once

// Q-learning on a two-action environment with 4-dimensional state. The value
// network is either an ELM whose output weights are advanced by the
// incremental regularized recursion, or a fully trainable single-hidden-layer
// network updated by stochastic gradient descent on the squared TD error.
// Shared machinery: linear ε decay, an alternating-action warm-start policy,
// a sliding-window replay memory, and a target snapshot refreshed every C
// environment steps (global counter).

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "horeg/elm.hpp"
#include "horeg/errors.hpp"
#include "horeg/rng.hpp"
#include "horeg/types.hpp"

namespace horeg::agent {

struct Transition {
  Eigen::Vector4d state;
  int action = 0;  // {0, 1}
  double reward = 0.0;
  Eigen::Vector4d next_state;
  bool terminal = false;
};

/// Sliding window over the newest `window` transitions, oldest evicted first.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t window) : window_(window) {}

  void push(Transition tr);
  std::size_t size() const noexcept { return buffer_.size(); }
  const Transition& operator[](std::size_t i) const { return buffer_[i]; }

  /// n uniform draws: with replacement while the memory holds fewer than n
  /// transitions, without replacement otherwise.
  std::vector<Transition> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t window_;
  std::deque<Transition> buffer_;
};

struct AgentConfig {
  Index hidden_nodes = 25;
  double regularization = 1.827e-5;
  // The regularization value is read as μ with R = (1/μ)·I by default; set
  // this to interpret it as μ̄ = 1/μ directly.
  bool regularization_is_mu_bar = false;
  int reg_order = 1;
  double eps_initial = 0.599;
  double eps_final = 0.05;
  long eps_episodes = 360;
  double discount = 0.93;
  Index minibatch = 2;
  long target_update_steps = 48;
  long heuristic_episodes = 10;
  std::size_t memory_window = 10000;
  double learning_rate = 0.0065;  // gradient baseline only
  std::uint64_t seed = 0;

  double mu_bar() const {
    return regularization_is_mu_bar ? regularization : 1.0 / regularization;
  }

  /// Regularized-ELM column of the reference hyperparameters.
  static AgentConfig elm_defaults() { return AgentConfig{}; }
  /// Gradient Q-network column of the reference hyperparameters.
  static AgentConfig gradient_defaults();

  void validate() const;  // throws ConfigError
};

/// Frozen output-weight snapshot used for TD targets.
struct TargetSnapshot {
  Matrix beta_target;
};

/// Linear decay from eps_initial to eps_final over eps_episodes, constant after.
double epsilon(const AgentConfig& config, long episode);

/// Alternating warm-start policy: action = t mod 2.
int heuristic_action(long t);

/// Argmax with ties broken toward the lower action index.
int argmax_action(const RowVector& q);

/// ε-greedy over a Q row: uniform action with probability eps, else argmax.
int epsilon_greedy(const RowVector& q, double eps, Rng& rng);

/// Full policy: heuristic during the first heuristic_episodes episodes
/// (t = step within the episode), ε-greedy afterwards.
int select_action(const elm::ElmModel& model, const Eigen::Vector4d& state, double eps, Rng& rng,
                  long episode, long t, const AgentConfig& config);

/// Regression batch for one minibatch of transitions: inputs are the states;
/// each target row starts from the model's current prediction, with the taken
/// action's entry replaced by r (terminal) or r + γ·max_a Q_target(s', a).
elm::Batch td_targets(const elm::ElmModel& model, const TargetSnapshot& target,
                      const std::vector<Transition>& minibatch, double gamma);

struct EpisodeRecord {
  double total_reward = 0.0;
  long steps = 0;
  bool aborted = false;
  std::string diagnostic;
};

/// Pass-through for environments whose states already are 4-vectors.
inline Eigen::Vector4d to_vector(const Eigen::Vector4d& s) { return s; }

/// ELM-backed Q-learner: first learn() solves the regularized init, every
/// later learn() applies the approximate incremental update.
class EqlmAgent {
 public:
  EqlmAgent(AgentConfig config, std::uint64_t seed);

  int act(const Eigen::Vector4d& state, long t);
  void observe(Transition tr) { memory_.push(std::move(tr)); }
  void learn();
  void end_episode() { ++episode_; }

  const AgentConfig& config() const noexcept { return config_; }
  long episode() const noexcept { return episode_; }
  long global_step() const noexcept { return global_step_; }
  const elm::ElmModel& model() const noexcept { return model_; }
  const TargetSnapshot& target() const noexcept { return target_; }
  const ReplayMemory& memory() const noexcept { return memory_; }
  const std::optional<elm::TrainState>& train_state() const noexcept { return train_; }

 private:
  AgentConfig config_;
  elm::ElmModel model_;
  TargetSnapshot target_;
  ReplayMemory memory_;
  Rng rng_policy_;
  Rng rng_sample_;
  std::optional<elm::TrainState> train_;
  long episode_ = 0;
  long global_step_ = 0;
};

/// Fully trainable single-hidden-layer Q-network (sigmoid hidden units).
struct QNet {
  Matrix input_weights;   // L×d
  Vector bias;            // L
  Matrix output_weights;  // L×k

  Index inputs() const { return input_weights.cols(); }
  Index hidden_nodes() const { return input_weights.rows(); }
  Index outputs() const { return output_weights.cols(); }
};

/// Same init distributions as the ELM (weights U(−1,1), bias U(0,1), β = 0).
QNet init_qnet(Index d, Index hidden, Index k, std::uint64_t seed);

Matrix qnet_predict(const QNet& net, const Matrix& inputs);

/// Mean over the minibatch of squared TD error on the taken actions, targets
/// from the frozen snapshot.
double td_loss(const QNet& net, const QNet& target, const std::vector<Transition>& minibatch,
               double gamma);

struct QNetGrad {
  Matrix input_weights;
  Vector bias;
  Matrix output_weights;
};

/// Analytic gradient of td_loss with respect to every parameter.
QNetGrad td_loss_gradient(const QNet& net, const QNet& target,
                          const std::vector<Transition>& minibatch, double gamma);

/// One SGD step of rate alpha on td_loss.
QNet gradient_q_update(QNet net, const QNet& target, const std::vector<Transition>& minibatch,
                       double gamma, double alpha);

/// Gradient-descent Q-learning baseline over the same episode machinery.
class GradQAgent {
 public:
  GradQAgent(AgentConfig config, std::uint64_t seed);

  int act(const Eigen::Vector4d& state, long t);
  void observe(Transition tr) { memory_.push(std::move(tr)); }
  void learn();
  void end_episode() { ++episode_; }

  const AgentConfig& config() const noexcept { return config_; }
  long episode() const noexcept { return episode_; }
  long global_step() const noexcept { return global_step_; }
  const QNet& net() const noexcept { return net_; }
  const QNet& target() const noexcept { return target_; }

 private:
  AgentConfig config_;
  QNet net_;
  QNet target_;
  ReplayMemory memory_;
  Rng rng_policy_;
  Rng rng_sample_;
  long episode_ = 0;
  long global_step_ = 0;
};

/// Drive one episode: act, step the environment, store the transition, learn
/// on a fresh minibatch every environment step. Numerical failures abort the
/// episode and are reported on the record instead of propagating.
///
/// Env contract: reset() and step(action) -> {state, reward, terminal}, with
/// to_vector(state) yielding an Eigen::Vector4d (found by ADL).
template <class Agent, class Env>
EpisodeRecord run_episode(Agent& agent, Env& env) {
  EpisodeRecord record;
  try {
    Eigen::Vector4d state = to_vector(env.reset());
    bool terminal = false;
    long t = 0;
    while (!terminal) {
      const int action = agent.act(state, t);
      const auto result = env.step(action);
      const Eigen::Vector4d next_state = to_vector(result.state);
      agent.observe(Transition{state, action, result.reward, next_state, result.terminal});
      agent.learn();
      record.total_reward += result.reward;
      ++t;
      state = next_state;
      terminal = result.terminal;
    }
    record.steps = t;
  } catch (const Error& e) {
    record.aborted = true;
    record.diagnostic = e.what();
  }
  agent.end_episode();
  return record;
}

}  // namespace horeg::agent
