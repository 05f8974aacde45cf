#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "lambda_lqg/errors.hpp"
#include "lambda_lqg/state_space.hpp"

namespace lambda_lqg {
namespace {

using testing::gaussian_matrix;

StateSpaceModel scalar_continuous(double a, double b, double sw, double sv) {
  return StateSpaceModel(Matrix::Constant(1, 1, a), (Matrix(1, 2) << sw, 0.0).finished(),
                         Matrix::Constant(1, 1, b), Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                         Matrix::Zero(1, 1), (Matrix(1, 2) << 0.0, sv).finished());
}

TEST(StateSpace, ConstructorRejectsInconsistentShapes) {
  EXPECT_THROW(StateSpaceModel(Matrix::Zero(2, 2), Matrix::Zero(3, 1), Matrix::Zero(2, 1),
                               Matrix::Zero(1, 2), Matrix::Zero(1, 2), Matrix::Zero(1, 1),
                               Matrix::Zero(1, 1)),
               Error);
  EXPECT_THROW(StateSpaceModel(Matrix::Zero(1, 1), Matrix::Zero(1, 1), Matrix::Zero(1, 1),
                               Matrix::Zero(1, 1), Matrix::Zero(1, 1), Matrix::Zero(1, 1),
                               Matrix::Zero(1, 1), -1.0),
               Error);
}

TEST(StateSpace, ExpmMatchesDiagonalization) {
  std::mt19937_64 rng(3);
  const Matrix s = gaussian_matrix(rng, 4, 4);
  const Vector d = (Vector(4) << -1.0, 0.3, 2.0, -4.0).finished();
  const Matrix m = s * d.asDiagonal() * s.inverse();
  const Matrix expected = s * d.array().exp().matrix().asDiagonal() * s.inverse();
  EXPECT_LT(relative_difference(expm(m), expected), 1e-10);
}

TEST(StateSpace, ScalarZohClosedForms) {
  const double a = -3.0, b = 2.0, sw = 0.7, sv = 0.4, h = 0.05;
  const StateSpaceModel d = discretize_zoh(scalar_continuous(a, b, sw, sv), h);
  EXPECT_NEAR(d.A(0, 0), std::exp(a * h), 1e-14);
  EXPECT_NEAR(d.B2(0, 0), b * (std::exp(a * h) - 1.0) / a, 1e-14);
  const double qd = sw * sw * (std::exp(2 * a * h) - 1.0) / (2 * a);
  EXPECT_NEAR((d.B1 * d.B1.transpose())(0, 0), qd, 1e-14);
  EXPECT_NEAR((d.D21 * d.D21.transpose())(0, 0), sv * sv / h, 1e-12);
  EXPECT_NEAR((d.B1 * d.D21.transpose()).norm(), 0.0, 1e-15);
  ASSERT_TRUE(d.sample_period);
  EXPECT_EQ(*d.sample_period, h);
}

TEST(StateSpace, ZohHandlesSingularA) {
  // Double integrator: A_d = [[1, h], [0, 1]], B_d = [h²/2; h].
  Matrix a(2, 2);
  a << 0, 1, 0, 0;
  const StateSpaceModel c(a, Matrix::Identity(2, 2), (Matrix(2, 1) << 0, 1).finished(),
                          Matrix::Zero(0, 2), (Matrix(1, 2) << 1, 0).finished(), Matrix::Zero(0, 1),
                          Matrix::Zero(1, 2));
  const double h = 0.1;
  const StateSpaceModel d = discretize_zoh(c, h);
  EXPECT_NEAR((d.A - (Matrix(2, 2) << 1, h, 0, 1).finished()).norm(), 0.0, 1e-15);
  EXPECT_NEAR((d.B2 - (Matrix(2, 1) << h * h / 2, h).finished()).norm(), 0.0, 1e-15);
  // Qd = ∫ e^{Aτ} e^{Aᵀτ} dτ = [[h + h³/3, h²/2], [h²/2, h]].
  Matrix qd(2, 2);
  qd << h + h * h * h / 3, h * h / 2, h * h / 2, h;
  EXPECT_LT((discretize_noise(c, h).process - qd).norm(), 1e-15);
}

TEST(StateSpace, VanLoanMatchesQuadrature) {
  std::mt19937_64 rng(11);
  const Matrix a = gaussian_matrix(rng, 3, 3);
  const Matrix b1 = gaussian_matrix(rng, 3, 2);
  const StateSpaceModel c(a, (Matrix(3, 3) << b1, Matrix::Zero(3, 1)).finished(), Matrix::Ones(3, 1),
                          Matrix::Zero(0, 3), Matrix::Ones(1, 3), Matrix::Zero(0, 1),
                          (Matrix(1, 3) << 0, 0, 1).finished());
  const double h = 0.2;
  // Composite Simpson on ∫₀ʰ e^{Aτ} B1 B1ᵀ e^{Aᵀτ} dτ.
  const int n = 400;
  Matrix sum = Matrix::Zero(3, 3);
  for (int k = 0; k <= n; ++k) {
    const double w = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    const Matrix e = expm(a * (h * k / n));
    sum += w * e * b1 * b1.transpose() * e.transpose();
  }
  const Matrix qd = sum * (h / n / 3.0);
  EXPECT_LT(relative_difference(discretize_noise(c, h).process, qd), 1e-10);
}

TEST(StateSpace, ZohRejectsCorrelatedNoiseAndDiscreteInput) {
  StateSpaceModel m = scalar_continuous(-1, 1, 1, 1);
  m.D21 = (Matrix(1, 2) << 1.0, 1.0).finished();
  EXPECT_THROW(discretize_zoh(m, 0.1), Error);
  const StateSpaceModel d = discretize_zoh(scalar_continuous(-1, 1, 1, 1), 0.1);
  try {
    discretize_zoh(d, 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDomainMismatch);
  }
}

TEST(StateSpace, BlockDiagAndBoundaries) {
  const StateSpaceModel a = scalar_continuous(-1, 1, 1, 1);
  Matrix a2(2, 2);
  a2 << 0, 1, -1, -1;
  const StateSpaceModel b(a2, Matrix::Identity(2, 2), Matrix::Ones(2, 1), Matrix::Zero(0, 2),
                          Matrix::Ones(1, 2), Matrix::Zero(0, 1), Matrix::Zero(1, 2));
  const StateSpaceModel s = block_diag({a, b});
  EXPECT_EQ(s.states(), 3);
  EXPECT_EQ(s.noise_inputs(), 4);
  EXPECT_EQ(s.A.bottomRightCorner(2, 2), a2);
  EXPECT_EQ(s.A.topRightCorner(1, 2).norm(), 0.0);
  const auto blocks = block_boundaries({a, b});
  ASSERT_EQ(blocks.size(), 2u);
  EXPECT_EQ(blocks[1].states, (BlockRange{1, 2}));
  EXPECT_EQ(blocks[1].noise, (BlockRange{2, 2}));
  EXPECT_EQ(blocks[1].measurements, (BlockRange{1, 1}));
  try {
    block_diag({a, discretize_zoh(a, 0.1)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDomainMismatch);
  }
}

TEST(StateSpace, CloseLoopMatchesHandBuiltInterconnection) {
  const StateSpaceModel p = discretize_zoh(scalar_continuous(0.5, 1, 1, 1), 0.1);
  LinearController k;
  k.A = Matrix::Constant(1, 1, 0.3);
  k.B = Matrix::Constant(1, 1, 0.2);
  k.C = Matrix::Constant(1, 1, -0.7);
  k.D = Matrix::Constant(1, 1, -0.1);
  const StateSpaceModel cl = close_loop(p, k);
  // Step the interconnection by hand from a random state and noise.
  const Vector x = (Vector(1) << 0.4).finished(), xi = (Vector(1) << -1.2).finished();
  const Vector w = (Vector(2) << 0.3, -0.8).finished();
  const Vector y = p.C2 * x + p.D21 * w;
  const Vector u = k.C * xi + k.D * y;
  const Vector x_next = p.A * x + p.B1 * w + p.B2 * u;
  const Vector xi_next = k.A * xi + k.B * y;
  const Vector z = p.C1 * x + p.D12 * u;
  Vector joint(2);
  joint << x, xi;
  Vector next(2);
  next << x_next, xi_next;
  EXPECT_LT((cl.A * joint + cl.B1 * w - next).norm(), 1e-15);
  EXPECT_LT((cl.C1 * joint + cl.D11 * w - z).norm(), 1e-15);
}

TEST(StateSpace, MarkovParameters) {
  LinearController k;
  k.A = Matrix::Constant(1, 1, 0.5);
  k.B = Matrix::Constant(1, 1, 2.0);
  k.C = Matrix::Constant(1, 1, 3.0);
  k.D = Matrix::Constant(1, 1, 1.0);
  const auto h = k.markov_parameters(4);
  ASSERT_EQ(h.size(), 4u);
  EXPECT_EQ(h[0](0, 0), 1.0);
  EXPECT_EQ(h[1](0, 0), 6.0);
  EXPECT_EQ(h[2](0, 0), 3.0);
  EXPECT_EQ(h[3](0, 0), 1.5);
}

TEST(StateSpace, JsonRoundTrip) {
  const StateSpaceModel d = discretize_zoh(scalar_continuous(-2, 1, 0.5, 0.25), 0.01);
  const StateSpaceModel back = state_space_from_json(nlohmann::json::parse(to_json(d).dump()));
  EXPECT_EQ(back.A, d.A);
  EXPECT_EQ(back.B1, d.B1);
  EXPECT_EQ(back.D21, d.D21);
  EXPECT_EQ(back.sample_period, d.sample_period);
}

}  // namespace
}  // namespace lambda_lqg
