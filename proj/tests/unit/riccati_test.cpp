#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lambda_lqg/errors.hpp"
#include "lambda_lqg/riccati.hpp"

namespace lambda_lqg {
namespace {

using testing::gaussian_matrix;

AreProblem scalar_problem(double a, double b, double q, double r) {
  AreProblem p;
  p.A = Matrix::Constant(1, 1, a);
  p.B = Matrix::Constant(1, 1, b);
  p.C = (Matrix(2, 1) << std::sqrt(q), 0.0).finished();
  p.D = (Matrix(2, 1) << 0.0, std::sqrt(r)).finished();
  return p;
}

AreProblem random_problem(std::mt19937_64& rng, Eigen::Index n, Eigen::Index m, bool discrete) {
  AreProblem p;
  p.A = gaussian_matrix(rng, n, n) * (discrete ? 1.2 / std::sqrt(double(n)) : 1.0);
  p.B = gaussian_matrix(rng, n, m);
  const Eigen::Index k = n + m;
  p.C = gaussian_matrix(rng, k, n);
  p.D = gaussian_matrix(rng, k, m) + (Matrix(k, m) << Matrix::Zero(n, m), Matrix::Identity(m, m)).finished();
  return p;
}

// Value iteration X ← Riccati map(X) from X = 0, written out independently.
Matrix dare_by_value_iteration(const AreProblem& p) {
  const Matrix q = p.C.transpose() * p.C, r = p.D.transpose() * p.D, s = p.C.transpose() * p.D;
  Matrix x = Matrix::Zero(p.A.rows(), p.A.rows());
  for (int it = 0; it < 200000; ++it) {
    const Matrix k = (r + p.B.transpose() * x * p.B).ldlt().solve(p.B.transpose() * x * p.A + s.transpose());
    const Matrix next = p.A.transpose() * x * p.A + q - (p.A.transpose() * x * p.B + s) * k;
    const double change = (next - x).norm();
    x = 0.5 * (next + next.transpose());
    if (change <= 1e-14 * (1.0 + x.norm())) break;
  }
  return x;
}

// Kleinman iteration with Kronecker-vectorized Lyapunov solves.
Matrix care_by_newton(const AreProblem& p, Matrix f) {
  const Eigen::Index n = p.A.rows();
  const Matrix q = p.C.transpose() * p.C, r = p.D.transpose() * p.D, s = p.C.transpose() * p.D;
  Matrix x;
  for (int it = 0; it < 60; ++it) {
    const Matrix ac = p.A + p.B * f;
    const Matrix w = q + s * f + f.transpose() * s.transpose() + f.transpose() * r * f;
    const Matrix i = Matrix::Identity(n, n);
    Matrix kron(n * n, n * n);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b) kron.block(a * n, b * n, n, n) = ac(b, a) * i;
    Matrix kron2(n * n, n * n);
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b) kron2.block(a * n, b * n, n, n) = (a == b ? 1.0 : 0.0) * ac.transpose();
    const Vector vec = (kron + kron2).partialPivLu().solve(-Eigen::Map<const Vector>(w.data(), n * n));
    x = Eigen::Map<const Matrix>(vec.data(), n, n);
    x = 0.5 * (x + x.transpose());
    f = -r.ldlt().solve(p.B.transpose() * x + s.transpose());
  }
  return x;
}

TEST(Riccati, ScalarClosedForms) {
  const AreProblem p = scalar_problem(1, 1, 1, 1);
  const AreSolution c = solve_care(p);
  EXPECT_NEAR(c.X(0, 0), 1.0 + std::sqrt(2.0), 1e-10);
  EXPECT_NEAR(c.F(0, 0), -(1.0 + std::sqrt(2.0)), 1e-10);
  const AreSolution d = solve_dare(p);
  EXPECT_NEAR(d.X(0, 0), (1.0 + std::sqrt(5.0)) / 2.0, 1e-10);
  EXPECT_NEAR(d.F(0, 0), -d.X(0, 0) / (1.0 + d.X(0, 0)), 1e-10);
}

TEST(Riccati, RandomDareMatchesValueIteration) {
  std::mt19937_64 rng(21);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Index n = 1 + trial % 6, m = 1 + trial % 3;
    const AreProblem p = random_problem(rng, n, m, true);
    const AreSolution s = solve_dare(p);
    EXPECT_LE(s.residual_norm, kRiccatiTolerance);
    EXPECT_TRUE(is_schur_stable(p.A + p.B * s.F));
    const Matrix x = dare_by_value_iteration(p);
    EXPECT_LT(relative_difference(s.X, x), 1e-8) << "trial " << trial;
    ++checked;
  }
  EXPECT_EQ(checked, 40);
}

TEST(Riccati, RandomCareMatchesNewton) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 1 + trial % 5, m = 1 + trial % 2;
    const AreProblem p = random_problem(rng, n, m, false);
    const AreSolution s = solve_care(p);
    EXPECT_LE(s.residual_norm, kRiccatiTolerance);
    EXPECT_TRUE(is_hurwitz(p.A + p.B * s.F));
    // Newton from the solver's own gain perturbed slightly still converges
    // to the unique stabilizing solution.
    const Matrix x = care_by_newton(p, s.F * 1.01);
    EXPECT_LT(relative_difference(s.X, x), 1e-8) << "trial " << trial;
  }
}

TEST(Riccati, SolutionsArePsdAndSymmetric) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const AreProblem p = random_problem(rng, 4, 2, trial % 2 == 0);
    const Matrix x = trial % 2 == 0 ? solve_dare(p).X : solve_care(p).X;
    EXPECT_LT((x - x.transpose()).norm(), 1e-10 * x.norm());
    Eigen::SelfAdjointEigenSolver<Matrix> es(x);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9 * x.norm());
  }
}

TEST(Riccati, CrossTermIsHonoured) {
  // With S = CᵀD the substitution u = v − R⁻¹Sᵀx gives a cross-free problem.
  std::mt19937_64 rng(24);
  const AreProblem p = random_problem(rng, 3, 2, true);
  const Matrix r = p.D.transpose() * p.D, s = p.C.transpose() * p.D;
  const Matrix k = r.ldlt().solve(s.transpose());
  AreProblem free = p;
  free.A = p.A - p.B * k;
  const Matrix h = p.C.transpose() * p.C - s * k;
  free.C = (Matrix(3 + 2, 3) << psd_factor(h), Matrix::Zero(2, 3)).finished();
  free.D = (Matrix(5, 2) << Matrix::Zero(3, 2), psd_factor(r)).finished();
  EXPECT_LT(relative_difference(solve_dare(p).X, solve_dare(free).X), 1e-9);
}

TEST(Riccati, UnstabilizableProblemIsRejected) {
  AreProblem p = scalar_problem(2.0, 0.0, 1.0, 1.0);
  try {
    solve_dare(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoStabilizingSolution);
  }
  EXPECT_THROW(solve_care(p), Error);
}

TEST(Riccati, DareNearUnitCircle) {
  // Lightly damped oscillator reached through a tiny input.
  const double th = 2.0 * 3.14159265358979323846 / 6.0;
  Matrix a(2, 2);
  a << std::cos(th), std::sin(th), -std::sin(th), std::cos(th);
  AreProblem p;
  p.A = a;
  p.B = (Matrix(2, 1) << 0.0, 1e-6).finished();
  p.C = (Matrix(3, 2) << 1, 0, 0, 0, 0, 0).finished();
  p.D = (Matrix(3, 1) << 0, 0, 1).finished();
  const AreSolution s = solve_dare(p);
  EXPECT_LE(s.residual_norm, kRiccatiTolerance);
  EXPECT_LT(spectral_radius(p.A + p.B * s.F), 1.0);
}

TEST(Lyapunov, ScalarDiscrete) {
  const Matrix p = solve_lyapunov(Matrix::Constant(1, 1, 0.5), Matrix::Ones(1, 1), TimeDomain::kDiscrete);
  EXPECT_NEAR(p(0, 0), 4.0 / 3.0, 1e-14);
  const Matrix c = solve_lyapunov(Matrix::Constant(1, 1, -2.0), Matrix::Ones(1, 1), TimeDomain::kContinuous);
  EXPECT_NEAR(c(0, 0), 0.25, 1e-14);
}

TEST(Lyapunov, BackendsAgreeAndSatisfyEquation) {
  std::mt19937_64 rng(25);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 2 + trial % 6;
    Matrix a = gaussian_matrix(rng, n, n);
    const Matrix g = gaussian_matrix(rng, n, n);
    const Matrix w = g * g.transpose();
    const Matrix ad = a * (0.95 / spectral_radius(a));
    const Matrix pd = solve_lyapunov(ad, w, TimeDomain::kDiscrete);
    EXPECT_LT((ad * pd * ad.transpose() - pd + w).norm(), 1e-9 * pd.norm());
    EXPECT_LT(relative_difference(pd, solve_lyapunov_kronecker(ad, w, TimeDomain::kDiscrete)), 1e-9);
    EXPECT_LT(relative_difference(pd, solve_lyapunov_schur(ad, w, TimeDomain::kDiscrete)), 1e-9);
    const Matrix ac = a - (spectral_abscissa(a) + 0.5) * Matrix::Identity(n, n);
    const Matrix pc = solve_lyapunov(ac, w, TimeDomain::kContinuous);
    EXPECT_LT((ac * pc + pc * ac.transpose() + w).norm(), 1e-9 * pc.norm());
    EXPECT_LT(relative_difference(pc, solve_lyapunov_schur(ac, w, TimeDomain::kContinuous)), 1e-9);
  }
}

TEST(Lyapunov, DoublingEqualsSeries) {
  Matrix a(2, 2);
  a << 0.9, 0.2, 0.0, 0.5;
  const Matrix w = Matrix::Identity(2, 2);
  Matrix sum = Matrix::Zero(2, 2), ak = Matrix::Identity(2, 2);
  for (int k = 0; k < 2000; ++k) {
    sum += ak * w * ak.transpose();
    ak = a * ak;
  }
  EXPECT_LT(relative_difference(solve_lyapunov_doubling(a, w), sum), 1e-13);
}

TEST(Lyapunov, UnstableIsRejected) {
  try {
    solve_lyapunov(Matrix::Constant(1, 1, 1.5), Matrix::Ones(1, 1), TimeDomain::kDiscrete);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnstable);
  }
}

TEST(RiccatiRecursion, ConvergesToDareGain) {
  std::mt19937_64 rng(26);
  const AreProblem p = random_problem(rng, 3, 1, true);
  const auto steps = riccati_recursion_finite(p, Matrix::Zero(3, 3), 400);
  ASSERT_EQ(steps.size(), 400u);
  EXPECT_LT((steps.front().F - solve_dare(p).F).norm(), 1e-8);
  // The last step only sees the stage cost: X_{T−1} = Q − S R⁻¹ Sᵀ.
  const Matrix r = p.D.transpose() * p.D, s = p.C.transpose() * p.D;
  EXPECT_LT((steps.back().X - (p.C.transpose() * p.C - s * r.inverse() * s.transpose())).norm(), 1e-12);
}

TEST(RiccatiRecursion, ValuesAreMonotoneInHorizon) {
  std::mt19937_64 rng(27);
  const AreProblem p = random_problem(rng, 3, 2, true);
  const auto steps = riccati_recursion_finite(p, Matrix::Zero(3, 3), 50);
  for (std::size_t t = 0; t + 1 < steps.size(); ++t) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(steps[t].X - steps[t + 1].X);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * steps[t].X.norm());
  }
}

}  // namespace
}  // namespace lambda_lqg
