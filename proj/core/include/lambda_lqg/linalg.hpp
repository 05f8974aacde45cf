#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace lambda_lqg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using ComplexVector = Eigen::VectorXcd;

/// (M + Mᵀ) / 2.
Matrix symmetrize(const Matrix& m);

/// Block-diagonal stacking of an arbitrary list of (possibly rectangular)
/// matrices.
Matrix block_diagonal(const std::vector<Matrix>& blocks);

/// Symmetric positive semidefinite square root S with Sᵀ S = M (S symmetric).
/// Tiny negative eigenvalues produced by round-off are clamped to zero.
Matrix psd_sqrt(const Matrix& m);

/// Factor R such that Rᵀ R = M. Uses Cholesky when M is positive definite and
/// falls back to an eigendecomposition for singular PSD input, in which case
/// rows belonging to (numerically) zero eigenvalues are exactly zero.
Matrix psd_factor(const Matrix& m);

ComplexVector eigenvalues(const Matrix& a);
double spectral_radius(const Matrix& a);
double spectral_abscissa(const Matrix& a);

bool is_schur_stable(const Matrix& a, double margin = 0.0);
bool is_hurwitz(const Matrix& a, double margin = 0.0);

/// Numerical rank with tolerance rel_tol * largest singular value.
int numerical_rank(const Matrix& m, double rel_tol = 1e-8);

enum class TimeDomain { kContinuous, kDiscrete };

/// PBH stabilizability of (A, B): rank [A - λI, B] = n for every eigenvalue λ
/// of A that is not strictly stable in the given domain. The rank tolerance is
/// rel_tol·σmax of the pencil; rel_tol = 0 selects the roundoff level
/// max(rows, cols)·machine epsilon, so that weak but genuine couplings such
/// as an ε-regularized disturbance input still count.
bool is_stabilizable(const Matrix& a, const Matrix& b, TimeDomain domain,
                     double rel_tol = 0.0);

/// PBH detectability of (C, A), the dual of is_stabilizable.
bool is_detectable(const Matrix& a, const Matrix& c, TimeDomain domain,
                   double rel_tol = 0.0);

Matrix observability_matrix(const Matrix& a, const Matrix& c);
Matrix controllability_matrix(const Matrix& a, const Matrix& b);

/// Relative difference ‖a - b‖ / max(1, ‖b‖) in the Frobenius norm.
double relative_difference(const Matrix& a, const Matrix& b);

}  // namespace lambda_lqg
