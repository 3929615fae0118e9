#include <doctest.h>

#include <cmath>

#include "oracle/oracle.hpp"
#include "testutil.hpp"

using namespace horeg;
using testutil::rel_err;

TEST_CASE("pinv satisfies the Moore-Penrose identities") {
  SUBCASE("invertible matrix") {
    Rng rng(1);
    const Matrix a = testutil::random_matrix(4, 4, rng) + 5.0 * Matrix::Identity(4, 4);
    CHECK(rel_err(oracle::pinv(a), a.inverse()) < 1e-10);
  }
  SUBCASE("rank-deficient diagonal") {
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = 2.0;
    Matrix expected = Matrix::Zero(2, 2);
    expected(0, 0) = 0.5;
    CHECK(rel_err(oracle::pinv(a), expected) < 1e-14);
  }
  SUBCASE("rectangular") {
    Rng rng(2);
    const Matrix a = testutil::random_matrix(5, 3, rng);
    const Matrix p = oracle::pinv(a);
    CHECK((a * p * a - a).norm() < 1e-8 * (1.0 + a.norm()));
    CHECK((p * a * p - p).norm() < 1e-8 * (1.0 + p.norm()));
    CHECK(((a * p) - (a * p).transpose()).norm() < 1e-8);
    CHECK(((p * a) - (p * a).transpose()).norm() < 1e-8);
  }
  SUBCASE("pinv of pinv returns the original on full rank") {
    Rng rng(3);
    const Matrix a = testutil::random_matrix(4, 6, rng);
    CHECK(rel_err(oracle::pinv(oracle::pinv(a)), a) < 1e-8);
  }
}

TEST_CASE("svd factors reconstruct the input") {
  Rng rng(4);
  const Matrix a = testutil::random_matrix(6, 4, rng);
  const oracle::SvdFactors f = oracle::svd_factors(a, 1e-12);
  CHECK((f.u * f.sigma.asDiagonal() * f.v.transpose() - a).norm() <= 1e-8 * (1.0 + a.norm()));
  for (Index i = 0; i + 1 < f.sigma.size(); ++i) CHECK(f.sigma(i) >= f.sigma(i + 1));
}

TEST_CASE("neumann_sum") {
  SUBCASE("c = 0 is the identity") {
    Rng rng(5);
    const Matrix f = testutil::random_matrix(3, 3, rng);
    CHECK(rel_err(oracle::neumann_sum(f, 0), Matrix::Identity(3, 3)) < 1e-15);
  }
  SUBCASE("geometric sum of a scaled identity") {
    const Matrix f = 0.5 * Matrix::Identity(2, 2);
    CHECK(rel_err(oracle::neumann_sum(f, 3), 1.875 * Matrix::Identity(2, 2)) < 1e-15);
  }
  SUBCASE("long sums approach the exact inverse") {
    Rng rng(6);
    Matrix f = testutil::random_matrix(4, 4, rng);
    f *= 0.9 / std::abs(f.eigenvalues().cwiseAbs().maxCoeff());
    const Matrix limit = (Matrix::Identity(4, 4) - f).inverse();
    CHECK((oracle::neumann_sum(f, 200) - limit).norm() < 1e-8 * limit.norm());
  }
}

TEST_CASE("stacked_solve") {
  Rng rng(7);
  const Matrix h = testutil::random_matrix(12, 4, rng);
  const Matrix y = testutil::random_matrix(12, 2, rng);
  const reg::RegStrategy strategy = reg::RegStrategy::scalar(0.7);
  const reg::HrConfig config{1, reg::Mode::standard, 1.0 - 1e-9};

  SUBCASE("single batch equals the direct solve") {
    const Matrix direct =
        reg::hr_solve(reg::RegProblem(h.transpose() * h, h.transpose() * y), strategy, config)
            .first;
    CHECK(rel_err(oracle::stacked_solve({{h, y}}, strategy, config), direct) < 1e-14);
  }
  SUBCASE("duplicated batch doubles the gram and cross") {
    reg::RegProblem doubled(2.0 * h.transpose() * h, 2.0 * h.transpose() * y);
    const Matrix direct = reg::hr_solve(doubled, strategy, config).first;
    CHECK(rel_err(oracle::stacked_solve({{h, y}, {h, y}}, strategy, config, false), direct) <
          1e-12);
  }
  SUBCASE("arbitrary splits agree with the unsplit solve") {
    const Matrix whole = oracle::stacked_solve({{h, y}}, strategy, config);
    std::vector<std::pair<Matrix, Matrix>> parts;
    Index at = 0;
    for (Index rows : {3, 1, 5, 2, 1}) {
      parts.push_back({h.middleRows(at, rows), y.middleRows(at, rows)});
      at += rows;
    }
    CHECK(rel_err(oracle::stacked_solve(parts, strategy, config), whole) < 1e-10);
  }
}

TEST_CASE("fd_gradient") {
  SUBCASE("quadratic") {
    Vector p(2);
    p << 1.0, 2.0;
    const Vector g = oracle::fd_gradient(
        [](const Vector& v) { return v.squaredNorm(); }, p, 1e-5);
    CHECK(g(0) == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(g(1) == doctest::Approx(4.0).epsilon(1e-6));
  }
  SUBCASE("linear is exact up to rounding") {
    Vector p(3);
    p << -1.0, 0.5, 2.0;
    Vector w(3);
    w << 3.0, -2.0, 0.25;
    const Vector g = oracle::fd_gradient(
        [&](const Vector& v) { return w.dot(v); }, p, 1e-4);
    CHECK((g - w).norm() < 1e-9);
  }
}
