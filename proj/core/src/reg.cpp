#include "horeg/reg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace horeg::reg {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

// Symmetric eigensolve with eigenvalues sorted descending. No clamping here.
void sym_eig(const Matrix& a, Matrix& vectors, Vector& values) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  if (solver.info() != Eigen::Success) {
    throw Error("symmetric eigendecomposition did not converge");
  }
  values = solver.eigenvalues().reverse();
  vectors = solver.eigenvectors().rowwise().reverse();
}

struct SumFactors {
  Matrix sum;           // HᵀH + R, symmetrized
  double lambda_max = 0.0;
  double lambda_min = 0.0;
  Eigen::LDLT<Matrix> ldlt;
};

SumFactors factor_sum(const RegProblem& problem, const Matrix& r) {
  if (r.rows() != problem.dim() || r.cols() != problem.dim()) {
    throw DimensionMismatch("regularization matrix does not match problem dimension");
  }
  SumFactors f;
  f.sum = symmetrized(problem.gram() + r);
  Matrix vectors;
  Vector values;
  sym_eig(f.sum, vectors, values);
  f.lambda_max = values(0);
  f.lambda_min = values(values.size() - 1);
  if (!(f.lambda_min > 1e-12 * f.lambda_max) || !(f.lambda_max > 0.0)) {
    std::ostringstream msg;
    msg << "HtH + R is numerically singular (lambda_min=" << f.lambda_min
        << ", lambda_max=" << f.lambda_max << ")";
    throw SingularSum(msg.str());
  }
  f.ldlt.compute(f.sum);
  if (f.ldlt.info() != Eigen::Success) throw SingularSum("LDLT of HtH + R failed");
  return f;
}

Matrix mode_numerator(const RegProblem& problem, const Matrix& r, Mode mode) {
  return mode == Mode::standard ? r : problem.gram();
}

// F = N · (HᵀH+R)⁻¹ with N symmetric, computed as (sum⁻¹ N)ᵀ.
Matrix factor_from(const SumFactors& f, const Matrix& numerator) {
  return f.ldlt.solve(numerator).transpose();
}

double power_method_radius(const Matrix& f) {
  const Index n = f.rows();
  Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
  double estimate = 0.0;
  for (int it = 0; it < 50; ++it) {
    Vector w = f * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    if (std::abs(norm - estimate) <= 1e-10 * std::max(1.0, norm)) return norm;
    estimate = norm;
    v = w / norm;
  }
  return estimate;
}

// Eigenvalues of F(R) (real and nonnegative for SPSD inputs): closed form on
// the commuting path, otherwise the symmetric-definite pencil (numerator, sum).
Vector factor_eigenvalues(const RegProblem& problem, const Matrix& r, const HrConfig& config) {
  if (auto joint = joint_eigenvalues(problem, r)) {
    const Vector& lam = problem.eig().values;
    Vector out(problem.dim());
    for (Index i = 0; i < problem.dim(); ++i) {
      const double denom = lam(i) + (*joint)(i);
      const double num = config.mode == Mode::standard ? (*joint)(i) : lam(i);
      out(i) = denom > 0.0 ? num / denom : kNaN;
    }
    return out;
  }
  const Matrix sum = symmetrized(problem.gram() + r);
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> ges(
      symmetrized(mode_numerator(problem, r, config.mode)), sum);
  if (ges.info() != Eigen::Success) throw Error("generalized eigensolve failed");
  return ges.eigenvalues();
}

bool is_positive_definite_matrix(const Matrix& r) {
  Matrix vectors;
  Vector values;
  sym_eig(symmetrized(r), vectors, values);
  const double lmax = values(0);
  const double lmin = values(values.size() - 1);
  return lmax > 0.0 && lmin > static_cast<double>(r.rows()) * kEps * lmax;
}

Matrix matrix_power(const Matrix& f, int exponent) {
  Matrix out = Matrix::Identity(f.rows(), f.cols());
  for (int i = 0; i < exponent; ++i) out = out * f;
  return out;
}

}  // namespace

RegProblem::RegProblem(Matrix gram, Matrix cross)
    : gram_(std::move(gram)),
      cross_(std::move(cross)),
      eig_once_(std::make_unique<std::once_flag>()) {
  if (gram_.rows() != gram_.cols()) {
    throw DimensionMismatch("gram matrix must be square");
  }
  if (cross_.rows() != gram_.rows()) {
    throw DimensionMismatch("cross matrix row count must match gram dimension");
  }
  const double asym = (gram_ - gram_.transpose()).norm();
  if (asym > 1e-12 * std::max(1.0, gram_.norm())) {
    throw Error("gram matrix exceeds the 1e-12 relative asymmetry tolerance");
  }
  gram_ = symmetrized(gram_);
}

RegProblem::RegProblem(const RegProblem& other)
    : gram_(other.gram_),
      cross_(other.cross_),
      eig_once_(std::make_unique<std::once_flag>()),
      eig_(other.eig_) {}

RegProblem& RegProblem::operator=(const RegProblem& other) {
  if (this != &other) {
    gram_ = other.gram_;
    cross_ = other.cross_;
    eig_once_ = std::make_unique<std::once_flag>();
    eig_ = other.eig_;
  }
  return *this;
}

const EigenDecomp& RegProblem::eig() const {
  std::call_once(*eig_once_, [this] {
    if (eig_) return;  // copied from an instance that already computed it
    Matrix vectors;
    Vector values;
    sym_eig(gram_, vectors, values);
    const double lmax = std::max(values(0), 0.0);
    const double floor = -1e-10 * lmax;
    for (Index i = 0; i < values.size(); ++i) {
      if (values(i) < floor) {
        std::ostringstream msg;
        msg << "gram matrix eigenvalue " << values(i) << " below PSD tolerance " << floor;
        throw NonPsd(msg.str());
      }
      values(i) = std::max(values(i), 0.0);
    }
    auto decomp = std::make_shared<EigenDecomp>();
    decomp->vectors = std::move(vectors);
    decomp->values = std::move(values);
    eig_ = std::move(decomp);
  });
  return *eig_;
}

Index RegProblem::rank() const {
  const Vector& values = eig().values;
  const double cutoff = static_cast<double>(dim()) * kEps * values(0);
  Index r = 0;
  while (r < dim() && values(r) > cutoff) ++r;
  return r;
}

RegStrategy RegStrategy::scalar(double mu_bar) {
  if (mu_bar < 0.0) throw InvalidStrategy("scalar strategy needs mu_bar >= 0");
  return RegStrategy(Kind::scalar, mu_bar, Vector(), Matrix());
}

RegStrategy RegStrategy::eig_shift_clamp(double mu_bar) {
  if (mu_bar < 0.0) throw InvalidStrategy("shift-clamp strategy needs mu_bar >= 0");
  return RegStrategy(Kind::eig_shift_clamp, mu_bar, Vector(), Matrix());
}

RegStrategy RegStrategy::eig_complement(double mu_bar) {
  if (mu_bar < 0.0) throw InvalidStrategy("complement strategy needs mu_bar >= 0");
  return RegStrategy(Kind::eig_complement, mu_bar, Vector(), Matrix());
}

RegStrategy RegStrategy::residual_target(double mu, Vector tail) {
  if (mu < 0.0) throw InvalidStrategy("residual-target strategy needs mu >= 0");
  if ((tail.array() < 0.0).any()) {
    throw InvalidStrategy("residual-target tail entries must be nonnegative");
  }
  return RegStrategy(Kind::residual_target, mu, std::move(tail), Matrix());
}

RegStrategy RegStrategy::custom(Matrix r) {
  if (r.rows() != r.cols()) throw InvalidStrategy("custom regularization matrix must be square");
  return RegStrategy(Kind::custom, 0.0, Vector(), std::move(r));
}

std::string RegStrategy::name() const {
  switch (kind_) {
    case Kind::scalar: return "scalar";
    case Kind::eig_shift_clamp: return "shift-clamp";
    case Kind::eig_complement: return "complement";
    case Kind::residual_target: return "residual-target";
    case Kind::custom: return "custom";
  }
  return "unknown";
}

Matrix materialize(const RegStrategy& strategy, const RegProblem& problem) {
  const Index n = problem.dim();
  switch (strategy.kind()) {
    case RegStrategy::Kind::scalar:
      return strategy.mu() * Matrix::Identity(n, n);
    case RegStrategy::Kind::eig_shift_clamp: {
      const EigenDecomp& eig = problem.eig();
      Vector lam_r = (strategy.mu() - eig.values.array()).cwiseMax(0.0);
      return symmetrized(eig.vectors * lam_r.asDiagonal() * eig.vectors.transpose());
    }
    case RegStrategy::Kind::eig_complement: {
      const EigenDecomp& eig = problem.eig();
      if (!(strategy.mu() > eig.values(0))) {
        std::ostringstream msg;
        msg << "complement strategy needs mu_bar > lambda_1 (" << strategy.mu()
            << " <= " << eig.values(0) << ")";
        throw InvalidStrategy(msg.str());
      }
      Vector lam_r = strategy.mu() - eig.values.array();
      return symmetrized(eig.vectors * lam_r.asDiagonal() * eig.vectors.transpose());
    }
    case RegStrategy::Kind::residual_target: {
      const EigenDecomp& eig = problem.eig();
      const Index rank = problem.rank();
      if (strategy.tail().size() != n - rank) {
        std::ostringstream msg;
        msg << "residual-target tail length " << strategy.tail().size()
            << " does not match nullity " << (n - rank);
        throw InvalidStrategy(msg.str());
      }
      if (rank < n && !(strategy.mu() > 0.0)) {
        throw InvalidStrategy("residual-target needs mu > 0 on a rank-deficient gram matrix");
      }
      Vector r_inv(n);
      for (Index i = 0; i < n; ++i) {
        r_inv(i) = (i < rank ? 1.0 / eig.values(i) : strategy.tail()(i - rank)) + strategy.mu();
      }
      Vector lam_r = r_inv.cwiseInverse();
      return symmetrized(eig.vectors * lam_r.asDiagonal() * eig.vectors.transpose());
    }
    case RegStrategy::Kind::custom: {
      Matrix r = symmetrized(strategy.custom_matrix());
      Matrix vectors;
      Vector values;
      sym_eig(r, vectors, values);
      const double scale = std::max(std::abs(values(0)), std::abs(values(values.size() - 1)));
      for (Index i = 0; i < values.size(); ++i) {
        if (values(i) < -1e-10 * scale) {
          std::ostringstream msg;
          msg << "custom regularization matrix has eigenvalue " << values(i)
              << " below the PSD tolerance";
          throw NonPsd(msg.str());
        }
        values(i) = std::max(values(i), 0.0);
      }
      return symmetrized(vectors * values.asDiagonal() * vectors.transpose());
    }
  }
  throw InvalidStrategy("unknown strategy kind");
}

std::optional<Vector> joint_eigenvalues(const RegProblem& problem, const Matrix& r) {
  if (r.rows() != problem.dim() || r.cols() != problem.dim()) {
    throw DimensionMismatch("regularization matrix does not match problem dimension");
  }
  const EigenDecomp& eig = problem.eig();
  Matrix d = eig.vectors.transpose() * r * eig.vectors;
  const Vector diag = d.diagonal();
  d.diagonal().setZero();
  if (d.norm() <= 1e-10 * std::max(1.0, diag.norm())) return diag;
  return std::nullopt;
}

Matrix reg_factor(const RegProblem& problem, const Matrix& r, const HrConfig& config,
                  bool enforce_spectral) {
  const SumFactors f = factor_sum(problem, r);
  Matrix factor = factor_from(f, symmetrized(mode_numerator(problem, r, config.mode)));
  if (enforce_spectral) {
    const double rho = spectral_radius(problem, r, config);
    if (!(rho < config.spectral_tolerance)) {
      std::ostringstream msg;
      msg << "spectral radius " << rho << " exceeds tolerance " << config.spectral_tolerance;
      throw SpectralViolation(msg.str());
    }
  }
  return factor;
}

double spectral_radius(const RegProblem& problem, const Matrix& r, const HrConfig& config) {
  if (auto joint = joint_eigenvalues(problem, r)) {
    const Vector& lam = problem.eig().values;
    double rho = 0.0;
    for (Index i = 0; i < problem.dim(); ++i) {
      const double denom = lam(i) + (*joint)(i);
      if (denom <= 0.0) continue;  // singular sum surfaces elsewhere
      const double num = config.mode == Mode::standard ? (*joint)(i) : lam(i);
      rho = std::max(rho, num / denom);
    }
    return rho;
  }
  const SumFactors f = factor_sum(problem, r);
  return power_method_radius(factor_from(f, symmetrized(mode_numerator(problem, r, config.mode))));
}

Matrix neumann_accumulate(const Matrix& f, int order) {
  Matrix s = Matrix::Identity(f.rows(), f.cols());
  for (int i = 0; i < order; ++i) {
    s = f * s;
    s.diagonal().array() += 1.0;
  }
  return s;
}

namespace {

// Shared body of hr_solve / approx_inverse_map: factor the sum, run the mode
// checks, and return the Horner-accumulated series with the factorization.
struct SolveParts {
  SumFactors sum;
  Matrix factor;
  Matrix series;  // Σ_{i=0}^{c} Fⁱ
  double rho = 0.0;
};

SolveParts prepare_solve(const RegProblem& problem, const Matrix& r, const HrConfig& config) {
  if (config.order < 0) throw Error("regularization order must be >= 0");
  SolveParts parts{factor_sum(problem, r), Matrix(), Matrix(), 0.0};
  parts.rho = spectral_radius(problem, r, config);
  if (config.mode == Mode::standard) {
    if (!(parts.rho < config.spectral_tolerance)) {
      std::ostringstream msg;
      msg << "spectral radius " << parts.rho << " violates the contraction requirement (< "
          << config.spectral_tolerance << ") in standard mode";
      throw SpectralViolation(msg.str());
    }
  } else if (!is_positive_definite_matrix(r)) {
    throw SpectralViolation("swapped mode requires a positive definite regularization matrix");
  }
  parts.factor = factor_from(parts.sum, symmetrized(mode_numerator(problem, r, config.mode)));
  parts.series = neumann_accumulate(parts.factor, config.order);
  return parts;
}

}  // namespace

std::pair<Matrix, HrDiagnostics> hr_solve(const RegProblem& problem, const RegStrategy& strategy,
                                          const HrConfig& config) {
  const Matrix r = materialize(strategy, problem);
  SolveParts parts = prepare_solve(problem, r, config);
  Matrix beta = parts.sum.ldlt.solve(parts.series * problem.cross());

  HrDiagnostics diag;
  diag.spectral_radius = parts.rho;
  diag.cond = parts.sum.lambda_max / parts.sum.lambda_min;
  const bool gram_pd =
      problem.lambda_max() > 0.0 && problem.lambda_min() > 1e-12 * problem.lambda_max();
  if (config.mode == Mode::swapped || gram_pd) {
    diag.residual_norm = spectral_norm(approx_residual(problem, r, config));
  } else {
    diag.residual_norm = kNaN;
  }
  if (gram_pd) {
    std::tie(diag.err_lower, diag.err_upper) = error_bounds(problem, r, config);
  } else {
    diag.err_lower = kNaN;
    diag.err_upper = kNaN;
  }
  diag.objective = diag.residual_norm * diag.cond;
  return {std::move(beta), diag};
}

Matrix approx_inverse_map(const RegProblem& problem, const Matrix& r, const HrConfig& config) {
  SolveParts parts = prepare_solve(problem, r, config);
  return symmetrized(parts.sum.ldlt.solve(parts.series));
}

Matrix approx_residual(const RegProblem& problem, const Matrix& r, const HrConfig& config) {
  if (config.order < 0) throw Error("regularization order must be >= 0");
  if (config.mode == Mode::standard) {
    const double lmax = problem.lambda_max();
    if (!(problem.lambda_min() > 1e-12 * lmax) || !(lmax > 0.0)) {
      throw SingularGram("standard-mode residual needs an invertible gram matrix");
    }
    const SumFactors f = factor_sum(problem, r);
    const Matrix factor = factor_from(f, symmetrized(r));
    return problem.gram().ldlt().solve(matrix_power(factor, config.order + 1));
  }
  return psd_pinv(problem) - approx_inverse_map(problem, r, config);
}

std::pair<double, double> error_bounds(const RegProblem& problem, const Matrix& r,
                                       const HrConfig& config) {
  const double lmax_gram = problem.lambda_max();
  if (!(problem.lambda_min() > 1e-12 * lmax_gram) || !(lmax_gram > 0.0)) {
    throw SingularGram("error bounds need an invertible gram matrix");
  }
  const SumFactors f = factor_sum(problem, r);
  const Vector factor_eigs = factor_eigenvalues(problem, r, config);
  const double lmin = factor_eigs.minCoeff();
  const double lmax = factor_eigs.maxCoeff();
  if (!(lmax < 1.0)) {
    std::ostringstream msg;
    msg << "largest factor eigenvalue " << lmax << " is not below 1";
    throw SpectralViolation(msg.str());
  }
  const Matrix factor = factor_from(f, symmetrized(mode_numerator(problem, r, config.mode)));
  const double numerator =
      f.ldlt.solve(matrix_power(factor, config.order + 1) * problem.cross()).norm();
  return {numerator / (1.0 - lmin), numerator / (1.0 - lmax)};
}

double cond_number(const RegProblem& problem, const Matrix& r) {
  const SumFactors f = factor_sum(problem, r);
  return f.lambda_max / f.lambda_min;
}

double objective(const RegProblem& problem, const Matrix& r, const HrConfig& config) {
  return spectral_norm(approx_residual(problem, r, config)) * cond_number(problem, r);
}

std::string sweep_kind_name(SweepKind kind) {
  switch (kind) {
    case SweepKind::scalar: return "scalar";
    case SweepKind::eig_shift_clamp: return "shift-clamp";
    case SweepKind::eig_complement: return "complement";
    case SweepKind::residual_target: return "residual-target";
  }
  return "unknown";
}

std::vector<SweepRow> sweep_objective(const RegProblem& problem,
                                      const std::vector<SweepKind>& strategies,
                                      const std::vector<int>& orders,
                                      const std::vector<double>& grid, Mode mode) {
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw Error("sweep grid must be strictly ascending");
  }
  std::vector<SweepRow> rows;
  rows.reserve(strategies.size() * orders.size() * grid.size());
  for (SweepKind kind : strategies) {
    for (int order : orders) {
      for (double mu : grid) {
        SweepRow row;
        row.strategy = sweep_kind_name(kind);
        row.order = order;
        row.mu_bar = mu;
        try {
          RegStrategy strategy = [&] {
            switch (kind) {
              case SweepKind::scalar: return RegStrategy::scalar(mu);
              case SweepKind::eig_shift_clamp: return RegStrategy::eig_shift_clamp(mu);
              case SweepKind::eig_complement:
                return RegStrategy::eig_complement(problem.lambda_max() + mu);
              case SweepKind::residual_target:
              default:
                return RegStrategy::residual_target(
                    mu, Vector::Zero(problem.dim() - problem.rank()));
            }
          }();
          const Matrix r = materialize(strategy, problem);
          const HrConfig config{order, mode, 1.0 - 1e-9};
          row.cond = cond_number(problem, r);
          row.residual_norm = spectral_norm(approx_residual(problem, r, config));
          row.objective = row.residual_norm * row.cond;
          row.feasible = std::isfinite(row.objective) && std::isfinite(row.cond) &&
                         std::isfinite(row.residual_norm);
        } catch (const Error&) {
          row.feasible = false;
        }
        if (!row.feasible) {
          row.objective = kNaN;
          row.cond = kNaN;
          row.residual_norm = kNaN;
        }
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  if ((a - a.transpose()).norm() <= 1e-12 * std::max(1.0, a.norm())) {
    Matrix vectors;
    Vector values;
    sym_eig(symmetrized(a), vectors, values);
    return values.cwiseAbs().maxCoeff();
  }
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

Matrix psd_pinv(const RegProblem& problem) {
  const EigenDecomp& eig = problem.eig();
  const double cutoff = static_cast<double>(problem.dim()) * kEps * eig.values(0);
  Vector inv = Vector::Zero(problem.dim());
  for (Index i = 0; i < problem.dim(); ++i) {
    if (eig.values(i) > cutoff) inv(i) = 1.0 / eig.values(i);
  }
  return symmetrized(eig.vectors * inv.asDiagonal() * eig.vectors.transpose());
}

}  // namespace horeg::reg
