#pragma once

#include <vector>

#include "lambda_lqg/linalg.hpp"

namespace lambda_lqg {

/// The quadruple ARE(A, B, C, D): state weight CᵀC, input weight DᵀD and
/// cross weight CᵀD.
struct AreProblem {
  Matrix A;
  Matrix B;
  Matrix C;
  Matrix D;
};

struct AreSolution {
  Matrix X;  ///< stabilizing solution, symmetric PSD
  Matrix F;  ///< optimal gain, u = F x
  double residual_norm = 0.0;
};

/// Relative residual tolerance enforced by both solvers.
inline constexpr double kRiccatiTolerance = 1e-9;

/// Continuous ARE
///   AᵀX + XA + CᵀC − (XB + CᵀD)(DᵀD)⁻¹(BᵀX + DᵀC) = 0,
///   F = −(DᵀD)⁻¹(BᵀX + DᵀC),
/// from the ordered real Schur form of the Hamiltonian matrix.
AreSolution solve_care(const AreProblem& prob);

/// Discrete ARE
///   AᵀXA − X + CᵀC − (AᵀXB + CᵀD)(DᵀD + BᵀXB)⁻¹(BᵀXA + DᵀC) = 0,
///   F = −(DᵀD + BᵀXB)⁻¹(BᵀXA + DᵀC),
/// from the ordered QZ decomposition of the extended symplectic pencil.
AreSolution solve_dare(const AreProblem& prob);

/// Residual of the CARE/DARE divided by the sum of the norms of its terms.
double care_relative_residual(const AreProblem& prob, const Matrix& x);
double dare_relative_residual(const AreProblem& prob, const Matrix& x);

/// Continuous: A P + P Aᵀ + W = 0. Discrete: A P Aᵀ − P + W = 0.
/// Discrete equations use the squared Smith iteration, which sums PSD terms
/// only and stays accurate when poles crowd the unit circle. Continuous
/// equations use Kronecker vectorization up to kKroneckerLimit states and
/// complex Schur (Bartels–Stewart) beyond.
Matrix solve_lyapunov(const Matrix& a, const Matrix& w, TimeDomain domain);

inline constexpr Eigen::Index kKroneckerLimit = 30;

/// Individual backends, exposed so that they can be cross-checked.
Matrix solve_lyapunov_kronecker(const Matrix& a, const Matrix& w, TimeDomain domain);
Matrix solve_lyapunov_schur(const Matrix& a, const Matrix& w, TimeDomain domain);
/// P = Σ_k A^k W A^kᵀ by repeated squaring; discrete only.
Matrix solve_lyapunov_doubling(const Matrix& a, const Matrix& w);

/// One backward step of the DARE map, the value X_t and the one-step gain.
struct RiccatiStep {
  Matrix X;
  Matrix F;
};
RiccatiStep riccati_step(const AreProblem& prob, const Matrix& x_next);

/// Backward recursion X_t = step(X_{t+1}) for t = T−1..0 starting from the
/// terminal weight. Element t of the result holds (X_t, F_t).
std::vector<RiccatiStep> riccati_recursion_finite(const AreProblem& prob, const Matrix& terminal,
                                                  int horizon);

}  // namespace lambda_lqg
