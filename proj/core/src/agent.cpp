#include "horeg/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

namespace horeg::agent {
namespace {

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Matrix sigmoid_hidden(const Matrix& inputs, const Matrix& weights, const Vector& bias) {
  Matrix h = inputs * weights.transpose();
  h.rowwise() += bias.transpose();
  return h.unaryExpr([](double z) { return stable_sigmoid(z); });
}

// Scalar TD target for one transition, from the frozen snapshot's Q row.
double td_target_value(const Transition& tr, const RowVector& q_next, double gamma) {
  if (tr.terminal) return tr.reward;
  return tr.reward + gamma * q_next.maxCoeff();
}

}  // namespace

void ReplayMemory::push(Transition tr) {
  if (tr.action != 0 && tr.action != 1) throw Error("transition action must be 0 or 1");
  buffer_.push_back(std::move(tr));
  if (buffer_.size() > window_) buffer_.pop_front();
}

std::vector<Transition> ReplayMemory::sample(std::size_t n, Rng& rng) const {
  if (buffer_.empty()) throw InsufficientData("cannot sample from an empty replay memory");
  std::vector<Transition> out;
  out.reserve(n);
  if (buffer_.size() < n) {
    for (std::size_t i = 0; i < n; ++i) {
      out.push_back(buffer_[rng.uniform_int(buffer_.size())]);
    }
    return out;
  }
  // Partial Fisher-Yates over the index range.
  std::vector<std::size_t> idx(buffer_.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.uniform_int(idx.size() - i);
    std::swap(idx[i], idx[j]);
    out.push_back(buffer_[idx[i]]);
  }
  return out;
}

AgentConfig AgentConfig::gradient_defaults() {
  AgentConfig cfg;
  cfg.hidden_nodes = 29;
  cfg.learning_rate = 0.0065;
  cfg.eps_initial = 0.670;
  cfg.eps_episodes = 400;
  cfg.discount = 0.99;
  cfg.minibatch = 26;
  cfg.target_update_steps = 70;
  return cfg;
}

void AgentConfig::validate() const {
  std::ostringstream bad;
  if (!(eps_final >= 0.0 && eps_final <= eps_initial && eps_initial <= 1.0)) {
    bad << "exploration probabilities must satisfy 0 <= eps_final <= eps_initial <= 1; ";
  }
  if (!(discount > 0.0 && discount <= 1.0)) bad << "discount must be in (0, 1]; ";
  if (minibatch < 1) bad << "minibatch must be >= 1; ";
  if (target_update_steps < 1) bad << "target_update_steps must be >= 1; ";
  if (hidden_nodes < 1) bad << "hidden_nodes must be >= 1; ";
  if (eps_episodes < 1) bad << "eps_episodes must be >= 1; ";
  if (!(regularization > 0.0)) bad << "regularization must be > 0; ";
  if (reg_order < 0) bad << "reg_order must be >= 0; ";
  if (!bad.str().empty()) throw ConfigError(bad.str());
}

double epsilon(const AgentConfig& config, long episode) {
  if (episode < 0) throw Error("episode index must be >= 0");
  if (episode >= config.eps_episodes) return config.eps_final;
  const double frac = static_cast<double>(episode) / static_cast<double>(config.eps_episodes);
  return config.eps_initial - frac * (config.eps_initial - config.eps_final);
}

int heuristic_action(long t) {
  if (t < 0) throw Error("time step must be >= 0");
  return static_cast<int>(t % 2);
}

int argmax_action(const RowVector& q) {
  int best = 0;
  for (Index i = 1; i < q.size(); ++i) {
    if (q(i) > q(best)) best = static_cast<int>(i);
  }
  return best;
}

int epsilon_greedy(const RowVector& q, double eps, Rng& rng) {
  const double u = rng.uniform();
  if (u < eps) return static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(q.size())));
  return argmax_action(q);
}

int select_action(const elm::ElmModel& model, const Eigen::Vector4d& state, double eps, Rng& rng,
                  long episode, long t, const AgentConfig& config) {
  if (episode < config.heuristic_episodes) return heuristic_action(t);
  const RowVector q = elm::predict(model, state.transpose());
  return epsilon_greedy(q, eps, rng);
}

elm::Batch td_targets(const elm::ElmModel& model, const TargetSnapshot& target,
                      const std::vector<Transition>& minibatch, double gamma) {
  if (minibatch.empty()) throw InsufficientData("td_targets needs a nonempty minibatch");
  const Index n = static_cast<Index>(minibatch.size());
  Matrix inputs(n, 4);
  Matrix next_inputs(n, 4);
  for (Index j = 0; j < n; ++j) {
    inputs.row(j) = minibatch[j].state.transpose();
    next_inputs.row(j) = minibatch[j].next_state.transpose();
  }
  Matrix targets = elm::predict(model, inputs);
  const Matrix q_next = elm::hidden_matrix(model, next_inputs) * target.beta_target;
  for (Index j = 0; j < n; ++j) {
    targets(j, minibatch[j].action) = td_target_value(minibatch[j], q_next.row(j), gamma);
  }
  return {std::move(inputs), std::move(targets)};
}

EqlmAgent::EqlmAgent(AgentConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      model_(elm::init_elm(4, config_.hidden_nodes, 2, Rng(seed).stream(0).seed())),
      target_{model_.output_weights},
      memory_(config_.memory_window),
      rng_policy_(Rng(seed).stream(1)),
      rng_sample_(Rng(seed).stream(2)) {
  config_.validate();
}

int EqlmAgent::act(const Eigen::Vector4d& state, long t) {
  return select_action(model_, state, epsilon(config_, episode_), rng_policy_, episode_, t,
                       config_);
}

void EqlmAgent::learn() {
  const auto minibatch = memory_.sample(static_cast<std::size_t>(config_.minibatch), rng_sample_);
  elm::Batch batch = td_targets(model_, target_, minibatch, config_.discount);
  if (!train_) {
    train_ = elm::ihr_init(model_, batch, reg::RegStrategy::scalar(config_.mu_bar()),
                           reg::HrConfig{config_.reg_order, reg::Mode::standard, 1.0 - 1e-9});
  } else {
    train_ = elm::eqlm_update(std::move(*train_), model_, batch);
  }
  model_.output_weights = train_->beta;
  ++global_step_;
  if (global_step_ % config_.target_update_steps == 0) {
    target_.beta_target = model_.output_weights;
  }
}

QNet init_qnet(Index d, Index hidden, Index k, std::uint64_t seed) {
  const elm::ElmModel proto = elm::init_elm(d, hidden, k, seed);
  return QNet{proto.input_weights, proto.bias, proto.output_weights};
}

Matrix qnet_predict(const QNet& net, const Matrix& inputs) {
  return sigmoid_hidden(inputs, net.input_weights, net.bias) * net.output_weights;
}

double td_loss(const QNet& net, const QNet& target, const std::vector<Transition>& minibatch,
               double gamma) {
  if (minibatch.empty()) throw InsufficientData("td_loss needs a nonempty minibatch");
  double sum = 0.0;
  for (const Transition& tr : minibatch) {
    const RowVector q = qnet_predict(net, tr.state.transpose());
    const RowVector q_next = qnet_predict(target, tr.next_state.transpose());
    const double e = q(tr.action) - td_target_value(tr, q_next, gamma);
    sum += e * e;
  }
  return sum / static_cast<double>(minibatch.size());
}

QNetGrad td_loss_gradient(const QNet& net, const QNet& target,
                          const std::vector<Transition>& minibatch, double gamma) {
  if (minibatch.empty()) throw InsufficientData("td_loss_gradient needs a nonempty minibatch");
  QNetGrad grad{Matrix::Zero(net.hidden_nodes(), net.inputs()), Vector::Zero(net.hidden_nodes()),
                Matrix::Zero(net.hidden_nodes(), net.outputs())};
  const double scale = 2.0 / static_cast<double>(minibatch.size());
  for (const Transition& tr : minibatch) {
    const Matrix h = sigmoid_hidden(tr.state.transpose(), net.input_weights, net.bias);  // 1×L
    const RowVector q = h * net.output_weights;
    const RowVector q_next = qnet_predict(target, tr.next_state.transpose());
    const double e = q(tr.action) - td_target_value(tr, q_next, gamma);

    const Vector h_col = h.transpose();
    grad.output_weights.col(tr.action) += scale * e * h_col;
    // dQ/db_i = β_{i,a}·h_i(1−h_i); dQ/dw_{i,m} = that times x_m.
    const Vector chain = scale * e *
                         net.output_weights.col(tr.action).cwiseProduct(h_col).cwiseProduct(
                             (1.0 - h_col.array()).matrix());
    grad.bias += chain;
    grad.input_weights += chain * tr.state.transpose();
  }
  return grad;
}

QNet gradient_q_update(QNet net, const QNet& target, const std::vector<Transition>& minibatch,
                       double gamma, double alpha) {
  const QNetGrad grad = td_loss_gradient(net, target, minibatch, gamma);
  net.input_weights -= alpha * grad.input_weights;
  net.bias -= alpha * grad.bias;
  net.output_weights -= alpha * grad.output_weights;
  return net;
}

GradQAgent::GradQAgent(AgentConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      net_(init_qnet(4, config_.hidden_nodes, 2, Rng(seed).stream(0).seed())),
      target_(net_),
      memory_(config_.memory_window),
      rng_policy_(Rng(seed).stream(1)),
      rng_sample_(Rng(seed).stream(2)) {
  config_.validate();
}

int GradQAgent::act(const Eigen::Vector4d& state, long t) {
  if (episode_ < config_.heuristic_episodes) return heuristic_action(t);
  const RowVector q = qnet_predict(net_, state.transpose());
  return epsilon_greedy(q, epsilon(config_, episode_), rng_policy_);
}

void GradQAgent::learn() {
  const auto minibatch = memory_.sample(static_cast<std::size_t>(config_.minibatch), rng_sample_);
  net_ = gradient_q_update(std::move(net_), target_, minibatch, config_.discount,
                           config_.learning_rate);
  ++global_step_;
  if (global_step_ % config_.target_update_steps == 0) target_ = net_;
}

}  // namespace horeg::agent
