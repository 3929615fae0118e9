#pragma once

// Extreme learning machine: a single hidden layer with frozen random input
// weights; only the output weights are trained, analytically. Batch training
// goes through the pseudo-inverse or the high-order regularized solve; the
// incremental recursions update the same solution one minibatch at a time.

#include <cstdint>
#include <string>
#include <utility>

#include "horeg/reg.hpp"
#include "horeg/types.hpp"

namespace horeg::elm {

enum class Activation { logistic_sigmoid };

/// Input weights and bias never change after init; predictions are
/// deterministic functions of (model, input).
struct ElmModel {
  Matrix input_weights;   // L×d
  Vector bias;            // L
  Activation activation = Activation::logistic_sigmoid;
  Matrix output_weights;  // L×k, the trainable β
  std::uint64_t seed = 0;

  Index inputs() const { return input_weights.cols(); }
  Index hidden_nodes() const { return input_weights.rows(); }
  Index outputs() const { return output_weights.cols(); }
};

struct Batch {
  Matrix inputs;   // N×d
  Matrix targets;  // N×k
};

/// Weights ~ U(−1, 1), bias ~ U(0, 1), drawn in that order from the seeded
/// generator (weights row-major first); β starts at zero.
/// Identical seeds give bit-identical models.
ElmModel init_elm(Index d, Index hidden, Index k, std::uint64_t seed,
                  Activation activation = Activation::logistic_sigmoid);

/// H[j,i] = sigmoid(w_i·x_j + b_i); every entry lies in (0, 1).
Matrix hidden_matrix(const ElmModel& model, const Matrix& inputs);

/// hidden_matrix(model, inputs) · β.
Matrix predict(const ElmModel& model, const Matrix& inputs);

/// Minimum-norm least-squares solve H†Y (SVD with the max(N,L)·ε rank cutoff).
Matrix pinv_solve(const Matrix& h, const Matrix& y);

/// β = pinv_solve(hidden_matrix(model, inputs), targets).
ElmModel train_pinv(ElmModel model, const Batch& batch);

/// β from the regularized solve on (HᵀH, HᵀY); order 0 with a scalar strategy
/// reproduces ridge regression.
std::pair<ElmModel, reg::HrDiagnostics> train_hr(ElmModel model, const Batch& batch,
                                                 const reg::RegStrategy& strategy,
                                                 const reg::HrConfig& config);

/// State advanced by the incremental recursions.
///
/// `info` accumulates HᵀH + R and is re-symmetrized after every update.
/// `info_inv_approx` is the recursion's inverse approximation: the exact
/// ridge inverse for the plain incremental recursion, the truncated-series
/// inverse map for the regularized ones. `bias_acc` accumulates the
/// correction that moves β back toward the unregularized solution.
struct TrainState {
  Matrix info;
  Matrix info_inv_approx;
  Matrix beta;
  Matrix bias_acc;
  Matrix reg;  // materialized R, fixed at init
  reg::HrConfig config;
  long step = 0;
};

/// Ridge init: info = HᵀH + I/μ, β = info⁻¹HᵀY. Requires μ > 0.
TrainState ielm_init(const ElmModel& model, const Batch& batch, double mu);

// Feature-space entry points: identical recursions on an explicit hidden
// matrix H instead of raw inputs. The model-based wrappers call these after
// hidden_matrix(); tests drive them with hand-built matrices.
TrainState ielm_init_features(const Matrix& h, const Matrix& y, double mu);
TrainState ielm_update_features(TrainState state, const Matrix& h, const Matrix& y);
TrainState ihr_init_features(const Matrix& h, const Matrix& y,
                             const reg::RegStrategy& strategy, const reg::HrConfig& config);
TrainState ihr_update_features(TrainState state, const Matrix& h, const Matrix& y);
TrainState bias_correct_features(TrainState state, const Matrix& h, const Matrix& y);
TrainState eqlm_update_features(TrainState state, const Matrix& h, const Matrix& y);

/// Rank-one-block (Woodbury) update of the exact ridge solution:
///   K = I − A†H_icᵀ(H_ic A† H_icᵀ + I)⁻¹H_ic,  β ← K(β + A†H_icᵀY_ic),  A† ← K A†.
/// Processing minibatches in any split matches the stacked batch solve.
TrainState ielm_update(TrainState state, const ElmModel& model, const Batch& increment);

/// Regularized init. The mode is routed from the rank of HᵀH: singular Gram
/// matrices use the swapped factor (needs R positive definite), full-rank ones
/// the standard factor. β = F_aim·HᵀY; the bias accumulator starts at
/// F_ar·HᵀY when the Gram matrix is well-conditioned (cond < 1e6), else zero.
TrainState ihr_init(const ElmModel& model, const Batch& batch,
                    const reg::RegStrategy& strategy, const reg::HrConfig& config);

/// Exact incremental step of the regularized solution: the inverse map is
/// rebuilt from the accumulated Gram matrix (mode re-routed by its rank) and
///   β ← (F_aim,t+1 F_aim,t⁻¹) β + F_aim,t+1 H_icᵀY_ic,
/// so β always equals the batch solve on all data consumed so far.
TrainState ihr_update(TrainState state, const ElmModel& model, const Batch& increment);

/// Advance the bias accumulator for the same increment, BEFORE ihr_update
/// absorbs it:
///   Δβ ← (F_ar,t+1 F_ar,t⁻¹) Δβ + F_ar,t+1 H_icᵀY_ic.
/// β + Δβ then reproduces the pseudo-inverse solution on the data seen so
/// far. Throws IllConditioned when cond(HᵀH) ≥ 1e6; a residual below 1e-12
/// makes this a no-op.
TrainState bias_correct(TrainState state, const ElmModel& model, const Batch& increment);

/// Approximate incremental step: the Woodbury recursion of ielm_update run on
/// whatever inverse approximation the state carries (the truncated-series map
/// after ihr_init). With order 0 this is exactly ielm_update.
TrainState eqlm_update(TrainState state, const ElmModel& model, const Batch& increment);

/// Binary model container (see README for the exact layout). Round-trips are
/// bit-exact on IEEE-754 little-endian hosts.
void save_model(const ElmModel& model, const std::string& path);
ElmModel load_model(const std::string& path);

}  // namespace horeg::elm
