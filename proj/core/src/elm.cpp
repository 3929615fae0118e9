#include "horeg/elm.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

#include "horeg/errors.hpp"
#include "horeg/rng.hpp"

namespace horeg::elm {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_batch(const ElmModel& model, const Batch& batch) {
  if (batch.inputs.rows() != batch.targets.rows()) {
    throw DimensionMismatch("batch inputs and targets must have the same row count");
  }
  if (batch.inputs.rows() < 1) throw DimensionMismatch("batch must contain at least one sample");
  if (batch.inputs.cols() != model.inputs()) {
    throw DimensionMismatch("batch input width does not match the model");
  }
}

// Rank routing shared by the regularized init/update: singular accumulated
// Gram matrices take the swapped factor.
reg::HrConfig routed_config(const reg::RegProblem& problem, reg::HrConfig config) {
  config.mode = problem.rank() < problem.dim() ? reg::Mode::swapped : reg::Mode::standard;
  return config;
}

bool gram_well_conditioned(const reg::RegProblem& problem) {
  return problem.positive_definite() &&
         problem.lambda_max() < 1e6 * problem.lambda_min();
}

// K = I − A†Hᵀ(H A† Hᵀ + I)⁻¹H applied to (β, A†). Shared by the exact ridge
// recursion and the approximate regularized one.
TrainState woodbury_step(TrainState state, const Matrix& h, const Matrix& y) {
  const Index hidden = state.info.rows();
  const Matrix gain = state.info_inv_approx * h.transpose();            // L×n
  Matrix inner = h * gain + Matrix::Identity(h.rows(), h.rows());       // n×n
  Eigen::LDLT<Matrix> ldlt(symmetrized(inner));
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw Error("incremental update hit a numerically degenerate minibatch");
  }
  const Matrix k = Matrix::Identity(hidden, hidden) - gain * ldlt.solve(h);
  state.beta = k * (state.beta + state.info_inv_approx * (h.transpose() * y));
  state.info_inv_approx = symmetrized(k * state.info_inv_approx);
  state.info = symmetrized(state.info + h.transpose() * h);
  ++state.step;
  return state;
}

void write_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::ifstream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_doubles_row_major(std::ofstream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
  }
}

Matrix read_doubles_row_major(std::ifstream& in, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof(double));
      m(i, j) = v;
    }
  }
  return m;
}

constexpr char kModelMagic[8] = {'H', 'R', 'E', 'L', 'M', '0', '1', '\n'};

}  // namespace

ElmModel init_elm(Index d, Index hidden, Index k, std::uint64_t seed, Activation activation) {
  if (d < 1 || hidden < 1 || k < 1) {
    throw DimensionMismatch("init_elm needs d, hidden, k all >= 1");
  }
  Rng rng(seed);
  ElmModel model;
  model.input_weights.resize(hidden, d);
  for (Index i = 0; i < hidden; ++i) {
    for (Index j = 0; j < d; ++j) model.input_weights(i, j) = rng.uniform(-1.0, 1.0);
  }
  model.bias.resize(hidden);
  for (Index i = 0; i < hidden; ++i) model.bias(i) = rng.uniform(0.0, 1.0);
  model.activation = activation;
  model.output_weights = Matrix::Zero(hidden, k);
  model.seed = seed;
  return model;
}

Matrix hidden_matrix(const ElmModel& model, const Matrix& inputs) {
  if (inputs.cols() != model.inputs()) {
    throw DimensionMismatch("input width does not match the model");
  }
  Matrix h = inputs * model.input_weights.transpose();
  h.rowwise() += model.bias.transpose();
  return h.unaryExpr([](double z) { return stable_sigmoid(z); });
}

Matrix predict(const ElmModel& model, const Matrix& inputs) {
  return hidden_matrix(model, inputs) * model.output_weights;
}

Matrix pinv_solve(const Matrix& h, const Matrix& y) {
  if (h.rows() != y.rows()) throw DimensionMismatch("H and Y row counts differ");
  Eigen::BDCSVD<Matrix> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(static_cast<double>(std::max(h.rows(), h.cols())) * kEps);
  return svd.solve(y);
}

ElmModel train_pinv(ElmModel model, const Batch& batch) {
  check_batch(model, batch);
  model.output_weights = pinv_solve(hidden_matrix(model, batch.inputs), batch.targets);
  return model;
}

std::pair<ElmModel, reg::HrDiagnostics> train_hr(ElmModel model, const Batch& batch,
                                                 const reg::RegStrategy& strategy,
                                                 const reg::HrConfig& config) {
  check_batch(model, batch);
  const Matrix h = hidden_matrix(model, batch.inputs);
  reg::RegProblem problem(h.transpose() * h, h.transpose() * batch.targets);
  auto [beta, diag] = reg::hr_solve(problem, strategy, config);
  model.output_weights = std::move(beta);
  return {std::move(model), diag};
}

TrainState ielm_init_features(const Matrix& h, const Matrix& y, double mu) {
  if (!(mu > 0.0)) throw Error("ridge init needs mu > 0");
  if (h.rows() != y.rows()) throw DimensionMismatch("H and Y row counts differ");
  const Index hidden = h.cols();
  TrainState state;
  state.reg = Matrix::Identity(hidden, hidden) / mu;
  state.info = symmetrized(h.transpose() * h + state.reg);
  Eigen::LDLT<Matrix> ldlt(state.info);
  if (ldlt.info() != Eigen::Success) throw SingularSum("ridge information matrix not factorable");
  state.info_inv_approx = symmetrized(ldlt.solve(Matrix::Identity(hidden, hidden)));
  state.beta = ldlt.solve(h.transpose() * y);
  state.bias_acc = Matrix::Zero(hidden, y.cols());
  state.config = reg::HrConfig{0, reg::Mode::standard, 1.0 - 1e-9};
  state.step = 1;
  return state;
}

TrainState ielm_update_features(TrainState state, const Matrix& h, const Matrix& y) {
  if (h.rows() != y.rows()) throw DimensionMismatch("H and Y row counts differ");
  return woodbury_step(std::move(state), h, y);
}

TrainState ihr_init_features(const Matrix& h, const Matrix& y, const reg::RegStrategy& strategy,
                             const reg::HrConfig& config) {
  if (h.rows() != y.rows()) throw DimensionMismatch("H and Y row counts differ");
  reg::RegProblem problem(h.transpose() * h, h.transpose() * y);

  TrainState state;
  state.config = routed_config(problem, config);
  state.reg = reg::materialize(strategy, problem);
  state.info = symmetrized(problem.gram() + state.reg);
  state.info_inv_approx = reg::approx_inverse_map(problem, state.reg, state.config);
  state.beta = state.info_inv_approx * problem.cross();
  if (gram_well_conditioned(problem)) {
    state.bias_acc = reg::approx_residual(problem, state.reg, state.config) * problem.cross();
  } else {
    state.bias_acc = Matrix::Zero(h.cols(), y.cols());
  }
  state.step = 1;
  return state;
}

TrainState ihr_update_features(TrainState state, const Matrix& h, const Matrix& y) {
  if (h.rows() != y.rows()) throw DimensionMismatch("H and Y row counts differ");
  const Matrix gram_next = symmetrized(state.info - state.reg + h.transpose() * h);
  reg::RegProblem problem(gram_next, Matrix(gram_next.rows(), 0));
  state.config = routed_config(problem, state.config);
  const Matrix aim_next = reg::approx_inverse_map(problem, state.reg, state.config);

  Eigen::LDLT<Matrix> ldlt(state.info_inv_approx);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw Error("inverse approximation became singular; re-initialize the state");
  }
  const Matrix k = ldlt.solve(aim_next).transpose();  // F_aim,t+1 · F_aim,t⁻¹
  state.beta = k * state.beta + aim_next * (h.transpose() * y);
  state.info = symmetrized(state.info + h.transpose() * h);
  state.info_inv_approx = aim_next;
  ++state.step;
  return state;
}

TrainState bias_correct_features(TrainState state, const Matrix& h, const Matrix& y) {
  if (h.rows() != y.rows()) throw DimensionMismatch("H and Y row counts differ");
  const Matrix gram_now = symmetrized(state.info - state.reg);
  reg::RegProblem problem_now(gram_now, Matrix(gram_now.rows(), 0));
  if (!gram_well_conditioned(problem_now)) {
    std::ostringstream msg;
    msg << "bias correction needs cond(gram) < 1e6, got "
        << (problem_now.positive_definite()
                ? problem_now.lambda_max() / problem_now.lambda_min()
                : std::numeric_limits<double>::infinity());
    throw IllConditioned(msg.str());
  }
  reg::RegProblem problem_next(symmetrized(gram_now + h.transpose() * h),
                               Matrix(gram_now.rows(), 0));

  const auto cfg_now = routed_config(problem_now, state.config);
  const auto cfg_next = routed_config(problem_next, state.config);
  const Matrix ar_now = reg::approx_residual(problem_now, state.reg, cfg_now);
  const Matrix ar_next = reg::approx_residual(problem_next, state.reg, cfg_next);
  if (reg::spectral_norm(ar_next) < 1e-12) return state;  // residual negligible

  Eigen::PartialPivLU<Matrix> lu(ar_now.transpose());
  const Matrix k = lu.solve(ar_next.transpose()).transpose();  // F_ar,t+1 · F_ar,t⁻¹
  state.bias_acc = k * state.bias_acc + ar_next * (h.transpose() * y);
  return state;
}

TrainState eqlm_update_features(TrainState state, const Matrix& h, const Matrix& y) {
  if (h.rows() != y.rows()) throw DimensionMismatch("H and Y row counts differ");
  return woodbury_step(std::move(state), h, y);
}

TrainState ielm_init(const ElmModel& model, const Batch& batch, double mu) {
  check_batch(model, batch);
  return ielm_init_features(hidden_matrix(model, batch.inputs), batch.targets, mu);
}

TrainState ielm_update(TrainState state, const ElmModel& model, const Batch& increment) {
  check_batch(model, increment);
  return ielm_update_features(std::move(state), hidden_matrix(model, increment.inputs),
                              increment.targets);
}

TrainState ihr_init(const ElmModel& model, const Batch& batch, const reg::RegStrategy& strategy,
                    const reg::HrConfig& config) {
  check_batch(model, batch);
  return ihr_init_features(hidden_matrix(model, batch.inputs), batch.targets, strategy, config);
}

TrainState ihr_update(TrainState state, const ElmModel& model, const Batch& increment) {
  check_batch(model, increment);
  return ihr_update_features(std::move(state), hidden_matrix(model, increment.inputs),
                             increment.targets);
}

TrainState bias_correct(TrainState state, const ElmModel& model, const Batch& increment) {
  check_batch(model, increment);
  return bias_correct_features(std::move(state), hidden_matrix(model, increment.inputs),
                               increment.targets);
}

TrainState eqlm_update(TrainState state, const ElmModel& model, const Batch& increment) {
  check_batch(model, increment);
  return eqlm_update_features(std::move(state), hidden_matrix(model, increment.inputs),
                              increment.targets);
}

void save_model(const ElmModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open model file for writing: " + path);
  out.write(kModelMagic, sizeof(kModelMagic));
  write_u64(out, static_cast<std::uint64_t>(model.inputs()));
  write_u64(out, static_cast<std::uint64_t>(model.hidden_nodes()));
  write_u64(out, static_cast<std::uint64_t>(model.outputs()));
  write_u64(out, static_cast<std::uint64_t>(model.activation));
  write_u64(out, model.seed);
  write_doubles_row_major(out, model.input_weights);
  write_doubles_row_major(out, model.bias);
  write_doubles_row_major(out, model.output_weights);
  if (!out) throw IoError("failed while writing model file: " + path);
}

ElmModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + 8, kModelMagic)) {
    throw IoError("not a model file (bad magic): " + path);
  }
  const auto d = static_cast<Index>(read_u64(in));
  const auto hidden = static_cast<Index>(read_u64(in));
  const auto k = static_cast<Index>(read_u64(in));
  const auto activation = static_cast<Activation>(read_u64(in));
  const std::uint64_t seed = read_u64(in);
  ElmModel model;
  model.input_weights = read_doubles_row_major(in, hidden, d);
  model.bias = read_doubles_row_major(in, hidden, 1).col(0);
  model.output_weights = read_doubles_row_major(in, hidden, k);
  model.activation = activation;
  model.seed = seed;
  if (!in) throw IoError("model file truncated: " + path);
  return model;
}

}  // namespace horeg::elm
