#pragma once

// High-order regularization of symmetric linear inverse problems.
//
// Everything here operates on the normal-equation pair (HᵀH, HᵀY). The
// central object is the regularization factor
//
//     F(R) = R (HᵀH + R)⁻¹          (standard mode)
//     F(R) = HᵀH (HᵀH + R)⁻¹       (swapped mode, for singular Gram matrices)
//
// and the solver truncates the series (I − F)⁻¹ = Σ Fⁱ after `order + 1`
// terms, so order 0 with R = μ̄·I is plain ridge regression and larger orders
// shrink the bias geometrically while keeping the conditioning benefit of R.

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "horeg/errors.hpp"
#include "horeg/types.hpp"

namespace horeg::reg {

/// Symmetric eigendecomposition, eigenvalues descending and clamped to ≥ 0.
struct EigenDecomp {
  Matrix vectors;  // columns are orthonormal eigenvectors
  Vector values;   // λ₁ ≥ … ≥ λ_n ≥ 0
};

/// The algebraic object the solvers work on: Gram matrix HᵀH (symmetrized on
/// construction), cross matrix HᵀY, and a cached eigendecomposition.
///
/// Immutable after construction; the eigendecomposition cache is written once
/// under std::call_once, so instances may be shared across threads.
class RegProblem {
 public:
  /// `gram` must be square and symmetric to 1e-12 relative asymmetry; `cross`
  /// must have matching row count (zero columns are fine).
  RegProblem(Matrix gram, Matrix cross);

  RegProblem(const RegProblem& other);
  RegProblem& operator=(const RegProblem& other);
  RegProblem(RegProblem&&) noexcept = default;
  RegProblem& operator=(RegProblem&&) noexcept = default;

  const Matrix& gram() const noexcept { return gram_; }
  const Matrix& cross() const noexcept { return cross_; }
  Index dim() const noexcept { return gram_.rows(); }

  /// Eigendecomposition of the Gram matrix (computed lazily, cached).
  /// Throws NonPsd if an eigenvalue is below −1e-10·λ_max; eigenvalues inside
  /// that tolerance are clamped to zero.
  const EigenDecomp& eig() const;

  /// Numerical rank: eigenvalues above dim·ε·λ_max.
  Index rank() const;

  double lambda_max() const { return eig().values(0); }
  double lambda_min() const { return eig().values(dim() - 1); }
  bool positive_definite() const { return rank() == dim(); }

 private:
  Matrix gram_;
  Matrix cross_;
  mutable std::unique_ptr<std::once_flag> eig_once_;
  mutable std::shared_ptr<const EigenDecomp> eig_;
};

enum class Mode { standard, swapped };

struct HrConfig {
  int order = 1;                            // series truncation c ≥ 0
  Mode mode = Mode::standard;
  double spectral_tolerance = 1.0 - 1e-9;   // enforced bound on ρ(F) in standard mode
};

/// Per-solve diagnostics.
struct HrDiagnostics {
  double spectral_radius = 0.0;  // ρ(F(R))
  double cond = 0.0;             // λ_max/λ_min of HᵀH + R
  double residual_norm = 0.0;    // ‖F_ar(R)‖₂
  double err_lower = 0.0;        // lower bound on ‖β̂ − β_opt‖ (NaN when undefined)
  double err_upper = 0.0;
  double objective = 0.0;        // ‖F_ar‖₂ · cond
};

/// Rule for building the regularization matrix R from a problem.
///
/// Eigenvalue-based variants are materialized in the Gram matrix's eigenbasis
/// so R and HᵀH commute by construction; `custom` passes a user matrix
/// through (symmetrized and PSD-checked) with no commutation guarantee.
class RegStrategy {
 public:
  enum class Kind { scalar, eig_shift_clamp, eig_complement, residual_target, custom };

  /// R = μ̄·I.
  static RegStrategy scalar(double mu_bar);
  /// λ_{R,i} = max{μ̄ − λ_i, 0}: lifts small eigenvalues to μ̄, keeps big ones.
  static RegStrategy eig_shift_clamp(double mu_bar);
  /// λ_{R,i} = μ̄ − λ_i with μ̄ > λ₁, so HᵀH + R = μ̄·I and cond = 1.
  static RegStrategy eig_complement(double mu_bar);
  /// R⁻¹ = (HᵀH)† + diag(tail on the null directions) + μ·I; the tail length
  /// must equal dim − rank, and μ > 0 whenever the Gram matrix is singular.
  static RegStrategy residual_target(double mu, Vector tail);
  /// Arbitrary SPSD matrix, symmetrized; eigenvalues below −1e-10·‖R‖ raise NonPsd.
  static RegStrategy custom(Matrix r);

  Kind kind() const noexcept { return kind_; }
  double mu() const noexcept { return mu_; }
  const Vector& tail() const noexcept { return tail_; }
  const Matrix& custom_matrix() const noexcept { return custom_; }
  std::string name() const;

 private:
  RegStrategy(Kind kind, double mu, Vector tail, Matrix custom)
      : kind_(kind), mu_(mu), tail_(std::move(tail)), custom_(std::move(custom)) {}

  Kind kind_;
  double mu_ = 0.0;
  Vector tail_;
  Matrix custom_;
};

/// Build the concrete R for a problem. Throws InvalidStrategy / NonPsd.
Matrix materialize(const RegStrategy& strategy, const RegProblem& problem);

/// Eigenvalues of R in the Gram matrix's eigenbasis, if the two commute
/// (off-diagonal mass of PᵀRP below 1e-10 relative); nullopt otherwise.
/// Entry i pairs with eigenvalue λ_i of the Gram matrix.
std::optional<Vector> joint_eigenvalues(const RegProblem& problem, const Matrix& r);

/// The regularization factor F(R) for the configured mode.
/// Throws SingularSum when HᵀH + R is numerically singular, and
/// SpectralViolation when `enforce_spectral` and ρ(F) ≥ spectral_tolerance.
Matrix reg_factor(const RegProblem& problem, const Matrix& r, const HrConfig& config,
                  bool enforce_spectral = false);

/// ρ(F(R)): exact from eigenvalues when R commutes with the Gram matrix,
/// otherwise a 50-iteration power method with tolerance 1e-10.
double spectral_radius(const RegProblem& problem, const Matrix& r, const HrConfig& config);

/// Solve for β̂ = (HᵀH+R)⁻¹ Σ_{i=0}^{c} Fⁱ(R) HᵀY with filled diagnostics.
/// The series is accumulated Horner-style (S ← F·S + I), never via explicit
/// matrix powers. Standard mode enforces ρ(F) < spectral_tolerance; swapped
/// mode requires R positive definite.
std::pair<Matrix, HrDiagnostics> hr_solve(const RegProblem& problem,
                                          const RegStrategy& strategy,
                                          const HrConfig& config);

/// The truncated inverse approximation F_aim = (HᵀH+R)⁻¹ Σ_{i=0}^{c} Fⁱ(R);
/// hr_solve's β̂ equals F_aim·HᵀY.
Matrix approx_inverse_map(const RegProblem& problem, const Matrix& r, const HrConfig& config);

/// Approximation residual of the inverse:
///   standard: F_ar = (HᵀH)⁻¹ F^{c+1}(R)      (needs a positive definite Gram)
///   swapped:  F_ar = (HᵀH)† − F_aim
/// F_ar·HᵀY is the exact estimation bias β_opt − β̂.
Matrix approx_residual(const RegProblem& problem, const Matrix& r, const HrConfig& config);

/// Lower/upper bounds on ‖β̂ − β_opt‖₂ for the configured order:
///   ‖(HᵀH+R)⁻¹F^{c+1}HᵀY‖ / (1 − λ_min(F))  ≤ ‖e_β‖ ≤  same / (1 − λ_max(F)).
std::pair<double, double> error_bounds(const RegProblem& problem, const Matrix& r,
                                       const HrConfig& config);

/// Condition number λ_max/λ_min of HᵀH + R. Throws SingularSum.
double cond_number(const RegProblem& problem, const Matrix& r);

/// The selection criterion Obj(R) = ‖F_ar(R)‖₂ · Cond(R).
double objective(const RegProblem& problem, const Matrix& r, const HrConfig& config);

/// Strategy families that can be swept over a μ̄ grid.
/// `complement` sweeps the offset above λ₁ (λ_{R,i} = λ₁ − λ_i + μ̄) so every
/// grid point is feasible; `residual_target` sweeps μ with a zero tail.
enum class SweepKind { scalar, eig_shift_clamp, eig_complement, residual_target };

std::string sweep_kind_name(SweepKind kind);

struct SweepRow {
  std::string strategy;
  int order = 0;
  double mu_bar = 0.0;
  double objective = 0.0;
  double cond = 0.0;
  double residual_norm = 0.0;
  bool feasible = true;  // infeasible rows carry NaN in the value columns
};

/// One row per (strategy, order, grid point), in that nesting order.
/// Infeasible combinations are marked rather than aborting the sweep.
std::vector<SweepRow> sweep_objective(const RegProblem& problem,
                                      const std::vector<SweepKind>& strategies,
                                      const std::vector<int>& orders,
                                      const std::vector<double>& grid,
                                      Mode mode = Mode::standard);

/// Σ_{i=0}^{c} Fⁱ by Horner accumulation (S ← F·S + I, c times).
Matrix neumann_accumulate(const Matrix& f, int order);

/// Spectral norm ‖A‖₂ (symmetric eigensolve when A is symmetric, SVD otherwise).
double spectral_norm(const Matrix& a);

/// Eigen-based Moore-Penrose pseudo-inverse of a symmetric PSD matrix, with
/// the dim·ε·λ_max rank cutoff.
Matrix psd_pinv(const RegProblem& problem);

}  // namespace horeg::reg
