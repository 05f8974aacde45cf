#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lambda_lqg/linalg.hpp"

namespace lambda_lqg {
namespace {

using testing::gaussian_matrix;

TEST(Linalg, BlockDiagonalPlacesRectangularBlocks) {
  const Matrix a = Matrix::Constant(2, 3, 1.0);
  const Matrix b = Matrix::Constant(1, 1, 2.0);
  const Matrix m = block_diagonal({a, b});
  ASSERT_EQ(m.rows(), 3);
  ASSERT_EQ(m.cols(), 4);
  EXPECT_EQ(m.topLeftCorner(2, 3), a);
  EXPECT_EQ(m(2, 3), 2.0);
  EXPECT_EQ(m.topRightCorner(2, 1).norm(), 0.0);
  EXPECT_EQ(m.bottomLeftCorner(1, 3).norm(), 0.0);
}

TEST(Linalg, PsdFactorReconstructsDefiniteAndSingularInput) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix g = gaussian_matrix(rng, 5, trial % 2 ? 5 : 2);
    const Matrix m = g * g.transpose();
    const Matrix r = psd_factor(m);
    EXPECT_LT((r.transpose() * r - m).norm(), 1e-10 * (1.0 + m.norm()));
  }
}

TEST(Linalg, PsdSqrtIsSymmetricRoot) {
  std::mt19937_64 rng(8);
  const Matrix g = gaussian_matrix(rng, 4, 4);
  const Matrix m = g * g.transpose();
  const Matrix s = psd_sqrt(m);
  EXPECT_LT((s - s.transpose()).norm(), 1e-12);
  EXPECT_LT((s * s - m).norm(), 1e-10 * m.norm());
}

TEST(Linalg, StabilityPredicates) {
  Matrix a(2, 2);
  a << 0.5, 1.0, 0.0, -0.9;
  EXPECT_NEAR(spectral_radius(a), 0.9, 1e-14);
  EXPECT_TRUE(is_schur_stable(a));
  EXPECT_FALSE(is_schur_stable(a, 0.2));
  EXPECT_FALSE(is_hurwitz(a));
  EXPECT_TRUE(is_hurwitz(-Matrix::Identity(3, 3)));
  EXPECT_NEAR(spectral_abscissa(a), 0.5, 1e-14);
}

TEST(Linalg, PbhStabilizabilityDistinguishesUnreachableUnstableModes) {
  Matrix a(2, 2);
  a << 1.2, 0.0, 0.0, 0.5;
  const Matrix reach_first = (Matrix(2, 1) << 1.0, 0.0).finished();
  const Matrix reach_second = (Matrix(2, 1) << 0.0, 1.0).finished();
  EXPECT_TRUE(is_stabilizable(a, reach_first, TimeDomain::kDiscrete));
  EXPECT_FALSE(is_stabilizable(a, reach_second, TimeDomain::kDiscrete));
  EXPECT_TRUE(is_detectable(a, reach_first.transpose(), TimeDomain::kDiscrete));
  EXPECT_FALSE(is_detectable(a, reach_second.transpose(), TimeDomain::kDiscrete));
  // Continuous time: 0.5 is unstable too.
  EXPECT_FALSE(is_stabilizable(a, reach_first, TimeDomain::kContinuous));
}

TEST(Linalg, PbhCountsWeakCouplingAsReachable) {
  // An undamped oscillator reached only through an ε-sized input.
  const double w = 2.0 * 3.14159265358979323846 * 1000.0;
  Matrix a(2, 2);
  a << 0.0, w, -w, 0.0;
  const Matrix b = (Matrix(2, 1) << 1e-6, 1e-6).finished();
  EXPECT_TRUE(is_stabilizable(a, b, TimeDomain::kContinuous));
  EXPECT_FALSE(is_stabilizable(a, Matrix::Zero(2, 1), TimeDomain::kContinuous));
  EXPECT_FALSE(is_stabilizable(a, b, TimeDomain::kContinuous, 1e-3));
}

TEST(Linalg, GramianRanks) {
  Matrix a(3, 3);
  a << 0, 1, 0, 0, 0, 1, 0, 0, 0;
  const Matrix b = (Matrix(3, 1) << 0, 0, 1).finished();
  EXPECT_EQ(numerical_rank(controllability_matrix(a, b)), 3);
  EXPECT_EQ(numerical_rank(observability_matrix(a, b.transpose())), 1);
}

TEST(Linalg, RelativeDifferenceUsesUnitFloor) {
  const Matrix a = Matrix::Constant(1, 1, 1e-3);
  EXPECT_DOUBLE_EQ(relative_difference(a, Matrix::Zero(1, 1)), 1e-3);
  EXPECT_DOUBLE_EQ(relative_difference(Matrix::Constant(1, 1, 11.0), Matrix::Constant(1, 1, 10.0)), 0.1);
}

}  // namespace
}  // namespace lambda_lqg
