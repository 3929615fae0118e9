#include "oracle.hpp"

#include <Eigen/SVD>

#include <limits>

#include "horeg/errors.hpp"

namespace horeg::oracle {

SvdFactors svd_factors(const Matrix& a, double rcond) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  const double cutoff = rcond * (sigma.size() > 0 ? sigma(0) : 0.0);
  Index rank = 0;
  while (rank < sigma.size() && sigma(rank) > cutoff) ++rank;
  SvdFactors f;
  f.u = svd.matrixU().leftCols(rank);
  f.sigma = sigma.head(rank);
  f.v = svd.matrixV().leftCols(rank);
  return f;
}

Matrix pinv(const Matrix& a, double rcond) {
  if (rcond < 0.0) {
    rcond = static_cast<double>(std::max(a.rows(), a.cols())) *
            std::numeric_limits<double>::epsilon();
  }
  const SvdFactors f = svd_factors(a, rcond);
  if (f.sigma.size() == 0) return Matrix::Zero(a.cols(), a.rows());
  return f.v * f.sigma.cwiseInverse().asDiagonal() * f.u.transpose();
}

Matrix neumann_sum(const Matrix& f, int c) {
  if (c < 0) throw Error("neumann_sum needs c >= 0");
  Matrix sum = Matrix::Identity(f.rows(), f.cols());
  Matrix power = Matrix::Identity(f.rows(), f.cols());
  for (int i = 1; i <= c; ++i) {
    power = power * f;
    sum += power;
  }
  return sum;
}

Matrix stacked_solve(const std::vector<std::pair<Matrix, Matrix>>& batches,
                     const reg::RegStrategy& strategy, reg::HrConfig config,
                     bool route_mode_by_rank) {
  if (batches.empty()) throw Error("stacked_solve needs at least one batch");
  Index rows = 0;
  const Index cols = batches.front().first.cols();
  const Index targets = batches.front().second.cols();
  for (const auto& [h, y] : batches) {
    if (h.cols() != cols || y.cols() != targets || h.rows() != y.rows()) {
      throw DimensionMismatch("inconsistent batch shapes");
    }
    rows += h.rows();
  }
  Matrix h_all(rows, cols);
  Matrix y_all(rows, targets);
  Index at = 0;
  for (const auto& [h, y] : batches) {
    h_all.middleRows(at, h.rows()) = h;
    y_all.middleRows(at, y.rows()) = y;
    at += h.rows();
  }
  reg::RegProblem problem(h_all.transpose() * h_all, h_all.transpose() * y_all);
  if (route_mode_by_rank) {
    config.mode =
        problem.rank() < problem.dim() ? reg::Mode::swapped : reg::Mode::standard;
  }
  return reg::hr_solve(problem, strategy, config).first;
}

Vector fd_gradient(const std::function<double(const Vector&)>& loss, const Vector& params,
                   double h) {
  if (!(h > 0.0)) throw Error("fd_gradient needs h > 0");
  Vector grad(params.size());
  Vector p = params;
  for (Index i = 0; i < params.size(); ++i) {
    p(i) = params(i) + h;
    const double up = loss(p);
    p(i) = params(i) - h;
    const double down = loss(p);
    p(i) = params(i);
    grad(i) = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace horeg::oracle
