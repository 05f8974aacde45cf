#include "lambda_lqg/riccati.hpp"

#include <cmath>
#include <optional>
#include <sstream>

#include <lapacke.h>

#include "lambda_lqg/errors.hpp"

namespace lambda_lqg {

namespace {

using ColMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

void check_problem(const AreProblem& p) {
  const Eigen::Index n = p.A.rows();
  if (p.A.cols() != n || p.B.rows() != n || p.C.cols() != n || p.D.rows() != p.C.rows() ||
      p.D.cols() != p.B.cols()) {
    fail(ErrorCode::kDimensionMismatch, "inconsistent ARE(A,B,C,D) dimensions");
  }
  Eigen::LLT<Matrix> r(p.D.transpose() * p.D);
  if (r.info() != Eigen::Success) {
    fail(ErrorCode::kInvalidArgument, "DᵀD must be positive definite");
  }
}

void check_stabilizable_detectable(const AreProblem& p, TimeDomain domain) {
  // Detectability is tested on the weight left after removing the cross term,
  // which is the pair that governs existence of the stabilizing solution.
  const Matrix r = p.D.transpose() * p.D;
  Eigen::LLT<Matrix> llt(r);
  const Matrix a_bar = p.A - p.B * llt.solve(p.D.transpose() * p.C);
  const Matrix c_bar = p.C - p.D * llt.solve(p.D.transpose() * p.C);
  if (!is_stabilizable(p.A, p.B, domain)) {
    fail(ErrorCode::kNoStabilizingSolution, "(A, B) is not stabilizable");
  }
  if (!is_detectable(a_bar, c_bar, domain)) {
    fail(ErrorCode::kNoStabilizingSolution, "(C, A) is not detectable");
  }
}

// Selection callbacks for the LAPACK ordering routines.
lapack_logical select_open_left_half(const double* re, const double* /*im*/) {
  return *re < 0.0;
}

lapack_logical select_inside_unit_disk(const double* ar, const double* ai, const double* b) {
  return std::hypot(*ar, *ai) < std::abs(*b);
}

Matrix subspace_solution(const ColMajor& z, Eigen::Index n) {
  const Matrix u1 = z.topLeftCorner(n, n);
  const Matrix u2 = z.block(n, 0, n, n);
  Eigen::PartialPivLU<Matrix> lu(u1.transpose());
  if (std::abs(lu.determinant()) < 1e-300 || !std::isfinite(lu.rcond()) || lu.rcond() < 1e-14) {
    fail(ErrorCode::kIllPosed, "stable invariant subspace is not a graph subspace");
  }
  return symmetrize(lu.solve(u2.transpose()).transpose());
}

}  // namespace

double care_relative_residual(const AreProblem& p, const Matrix& x) {
  const Matrix r = p.D.transpose() * p.D;
  const Matrix s = x * p.B + p.C.transpose() * p.D;
  const Matrix t1 = p.A.transpose() * x + x * p.A;
  const Matrix t2 = p.C.transpose() * p.C;
  const Matrix t3 = s * r.llt().solve(s.transpose());
  const double denom = t1.norm() + t2.norm() + t3.norm();
  return (t1 + t2 - t3).norm() / std::max(denom, 1e-300);
}

double dare_relative_residual(const AreProblem& p, const Matrix& x) {
  const Matrix r = p.D.transpose() * p.D + p.B.transpose() * x * p.B;
  const Matrix s = p.A.transpose() * x * p.B + p.C.transpose() * p.D;
  const Matrix t1 = p.A.transpose() * x * p.A;
  const Matrix t2 = p.C.transpose() * p.C;
  const Matrix t3 = s * r.llt().solve(s.transpose());
  const double denom = t1.norm() + x.norm() + t2.norm() + t3.norm();
  return (t1 - x + t2 - t3).norm() / std::max(denom, 1e-300);
}

AreSolution solve_care(const AreProblem& p) {
  check_problem(p);
  const Eigen::Index n = p.A.rows();
  check_stabilizable_detectable(p, TimeDomain::kContinuous);
  const Matrix r = p.D.transpose() * p.D;
  Eigen::LLT<Matrix> llt(r);
  const Matrix s = p.C.transpose() * p.D;
  const Matrix a_bar = p.A - p.B * llt.solve(s.transpose());
  const Matrix q_bar = symmetrize(p.C.transpose() * p.C - s * llt.solve(s.transpose()));
  const Matrix g = symmetrize(p.B * llt.solve(p.B.transpose()));

  ColMajor h(2 * n, 2 * n);
  h.topLeftCorner(n, n) = a_bar;
  h.topRightCorner(n, n) = -g;
  h.bottomLeftCorner(n, n) = -q_bar;
  h.bottomRightCorner(n, n) = -a_bar.transpose();

  const double h_norm = std::max(1.0, h.norm());
  {
    const ComplexVector ev = eigenvalues(h);
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
      if (std::abs(ev(k).real()) < 1e-12 * h_norm) {
        fail(ErrorCode::kIllPosed, "Hamiltonian has eigenvalues on the imaginary axis");
      }
    }
  }

  const lapack_int dim = static_cast<lapack_int>(2 * n);
  lapack_int sdim = 0;
  std::vector<double> wr(static_cast<size_t>(dim));
  std::vector<double> wi(static_cast<size_t>(dim));
  ColMajor vs(dim, dim);
  const lapack_int info = LAPACKE_dgees(LAPACK_COL_MAJOR, 'V', 'S', select_open_left_half, dim,
                                        h.data(), dim, &sdim, wr.data(), wi.data(), vs.data(), dim);
  if (info != 0) fail(ErrorCode::kIllPosed, "ordered Schur decomposition failed");
  if (sdim != n) {
    fail(ErrorCode::kNoStabilizingSolution, "Hamiltonian stable subspace has wrong dimension");
  }
  AreSolution sol;
  sol.X = subspace_solution(vs, n);
  sol.F = -llt.solve(p.B.transpose() * sol.X + p.D.transpose() * p.C);
  sol.residual_norm = care_relative_residual(p, sol.X);
  if (!is_hurwitz(p.A + p.B * sol.F)) {
    fail(ErrorCode::kNoStabilizingSolution, "CARE solution is not stabilizing");
  }
  if (sol.residual_norm > kRiccatiTolerance) {
    std::ostringstream os;
    os << "CARE residual " << sol.residual_norm << " exceeds tolerance";
    fail(ErrorCode::kIllPosed, os.str());
  }
  return sol;
}

namespace {

// Stabilizing DARE solution from the ordered QZ form of the extended
// symplectic pencil, or nothing when the ordering is numerically unreliable.
std::optional<Matrix> dare_by_qz(const AreProblem& p, const Matrix& q, const Matrix& s, const Matrix& r) {
  const Eigen::Index n = p.A.rows();
  const Eigen::Index m = p.B.cols();
  // Extended pencil λ M − L on v = [x; costate; u]:
  //   L = [[A, 0, B], [−Q, I, −S], [Sᵀ, 0, R]],  M = [[I, 0, 0], [0, Aᵀ, 0], [0, −Bᵀ, 0]].
  const Eigen::Index dim = 2 * n + m;
  ColMajor l = ColMajor::Zero(dim, dim);
  ColMajor mm = ColMajor::Zero(dim, dim);
  l.block(0, 0, n, n) = p.A;
  l.block(0, 2 * n, n, m) = p.B;
  l.block(n, 0, n, n) = -q;
  l.block(n, n, n, n) = Matrix::Identity(n, n);
  l.block(n, 2 * n, n, m) = -s;
  l.block(2 * n, 0, m, n) = s.transpose();
  l.block(2 * n, 2 * n, m, m) = r;
  mm.block(0, 0, n, n) = Matrix::Identity(n, n);
  mm.block(n, n, n, n) = p.A.transpose();
  mm.block(2 * n, n, m, n) = -p.B.transpose();

  const auto d = static_cast<lapack_int>(dim);
  lapack_int sdim = 0;
  std::vector<double> ar(static_cast<size_t>(dim));
  std::vector<double> ai(static_cast<size_t>(dim));
  std::vector<double> beta(static_cast<size_t>(dim));
  ColMajor vsl(dim, dim);
  ColMajor vsr(dim, dim);
  const lapack_int info =
      LAPACKE_dgges(LAPACK_COL_MAJOR, 'N', 'V', 'S', select_inside_unit_disk, d, l.data(), d,
                    mm.data(), d, &sdim, ar.data(), ai.data(), beta.data(), vsl.data(), d,
                    vsr.data(), d);
  if (info != 0) return std::nullopt;
  for (size_t k = 0; k < ar.size(); ++k) {
    const double mag = std::hypot(ar[k], ai[k]);
    if (std::abs(beta[k]) > 0.0 && std::abs(mag - std::abs(beta[k])) < 1e-10 * std::abs(beta[k])) {
      return std::nullopt;
    }
  }
  if (sdim != n) {
    fail(ErrorCode::kNoStabilizingSolution, "symplectic pencil stable subspace has wrong dimension");
  }
  return subspace_solution(vsr, n);
}

// Structure-preserving doubling on the cross-term-free form. Needs no
// eigenvalue ordering, so it still converges when closed-loop poles sit
// within roundoff-sized distances of the unit circle.
std::optional<Matrix> dare_by_doubling(const AreProblem& p, const Matrix& q, const Matrix& s,
                                       const Matrix& r) {
  const Eigen::Index n = p.A.rows();
  const Eigen::LLT<Matrix> r_llt(r);
  Matrix a = p.A - p.B * r_llt.solve(s.transpose());
  Matrix g = symmetrize(p.B * r_llt.solve(p.B.transpose()));
  Matrix h = symmetrize(q - s * r_llt.solve(s.transpose()));
  const Matrix eye = Matrix::Identity(n, n);
  for (int it = 0; it < 200; ++it) {
    const Eigen::PartialPivLU<Matrix> w(eye + g * h);
    const Matrix wa = w.solve(a);
    const Matrix wg = w.solve(g);
    const Matrix h_next = symmetrize(h + a.transpose() * h * wa);
    g = symmetrize(g + a * wg * a.transpose());
    a = a * wa;
    const double change = (h_next - h).norm();
    h = h_next;
    if (!h.allFinite()) return std::nullopt;
    if (change <= 1e-15 * std::max(1.0, h.norm())) return h;
  }
  return std::nullopt;
}

}  // namespace

AreSolution solve_dare(const AreProblem& p) {
  check_problem(p);
  check_stabilizable_detectable(p, TimeDomain::kDiscrete);
  const Matrix q = p.C.transpose() * p.C;
  const Matrix s = p.C.transpose() * p.D;
  const Matrix r = p.D.transpose() * p.D;

  auto finish = [&](const Matrix& x) {
    AreSolution sol;
    sol.X = x;
    const Matrix gain_lhs = r + p.B.transpose() * sol.X * p.B;
    sol.F = -gain_lhs.llt().solve(p.B.transpose() * sol.X * p.A + p.D.transpose() * p.C);
    sol.residual_norm = dare_relative_residual(p, sol.X);
    return sol;
  };
  auto acceptable = [&](const AreSolution& sol) {
    return sol.residual_norm <= kRiccatiTolerance && is_schur_stable(p.A + p.B * sol.F);
  };

  std::optional<AreSolution> best;
  if (auto x = dare_by_qz(p, q, s, r)) {
    best = finish(*x);
    if (acceptable(*best)) return *best;
  }
  if (auto x = dare_by_doubling(p, q, s, r)) {
    AreSolution sol = finish(*x);
    if (acceptable(sol)) return sol;
    if (!best || sol.residual_norm < best->residual_norm) best = sol;
  }
  if (!best) fail(ErrorCode::kIllPosed, "symplectic pencil has eigenvalues on the unit circle");
  if (!is_schur_stable(p.A + p.B * best->F)) {
    fail(ErrorCode::kNoStabilizingSolution, "DARE solution is not stabilizing");
  }
  std::ostringstream os;
  os << "DARE residual " << best->residual_norm << " exceeds tolerance";
  fail(ErrorCode::kIllPosed, os.str());
}

Matrix solve_lyapunov_kronecker(const Matrix& a, const Matrix& w, TimeDomain domain) {
  const Eigen::Index n = a.rows();
  const Matrix eye = Matrix::Identity(n, n);
  Matrix kron(n * n, n * n);
  // vec(A P Bᵀ) = (B ⊗ A) vec(P), column-major vec.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (domain == TimeDomain::kDiscrete) {
        kron.block(i * n, j * n, n, n) = a(i, j) * a - (i == j ? eye : Matrix::Zero(n, n));
      } else {
        kron.block(i * n, j * n, n, n) = a(i, j) * eye + (i == j ? a : Matrix::Zero(n, n));
      }
    }
  }
  const Matrix rhs = -w;
  const Vector vec_w = Eigen::Map<const Vector>(rhs.data(), n * n);
  Eigen::PartialPivLU<Matrix> lu(kron);
  const Vector vec_p = lu.solve(vec_w);
  return symmetrize(Eigen::Map<const Matrix>(vec_p.data(), n, n));
}

Matrix solve_lyapunov_schur(const Matrix& a, const Matrix& w, TimeDomain domain) {
  using CMatrix = Eigen::MatrixXcd;
  using CVector = Eigen::VectorXcd;
  const Eigen::Index n = a.rows();
  Eigen::ComplexSchur<Matrix> schur(a);
  const CMatrix& t = schur.matrixT();
  const CMatrix& u = schur.matrixU();
  const CMatrix wt = u.adjoint() * w.cast<std::complex<double>>() * u;
  CMatrix p = CMatrix::Zero(n, n);
  // Column j of T P Tᴴ couples P(:, l) for l ≥ j only, so sweep j backwards.
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    CVector tail = CVector::Zero(n);
    for (Eigen::Index l = j + 1; l < n; ++l) tail += p.col(l) * std::conj(t(j, l));
    CMatrix lhs;
    CVector rhs;
    if (domain == TimeDomain::kDiscrete) {
      lhs = std::conj(t(j, j)) * t - CMatrix::Identity(n, n);
      rhs = -wt.col(j) - t * tail;
    } else {
      lhs = t + std::conj(t(j, j)) * CMatrix::Identity(n, n);
      rhs = -wt.col(j) - tail;
    }
    p.col(j) = lhs.triangularView<Eigen::Upper>().solve(rhs);
  }
  return symmetrize((u * p * u.adjoint()).real());
}

Matrix solve_lyapunov_doubling(const Matrix& a, const Matrix& w) {
  Matrix ak = a;
  Matrix p = symmetrize(w);
  for (int it = 0; it < 200; ++it) {
    const Matrix step = ak * p * ak.transpose();
    p = symmetrize(p + step);
    if (step.norm() <= 1e-17 * p.norm()) return p;
    ak = ak * ak;
    if (!ak.allFinite()) break;
  }
  fail(ErrorCode::kUnstable, "squared Smith iteration did not converge");
}

Matrix solve_lyapunov(const Matrix& a, const Matrix& w, TimeDomain domain) {
  if (a.rows() != a.cols() || w.rows() != a.rows() || w.cols() != a.rows()) {
    fail(ErrorCode::kDimensionMismatch, "Lyapunov operands must be square and conformal");
  }
  if (a.size() == 0) return a;
  const bool stable = domain == TimeDomain::kDiscrete ? is_schur_stable(a) : is_hurwitz(a);
  if (!stable) fail(ErrorCode::kUnstable, "Lyapunov equation needs a stable A");
  const Matrix ws = symmetrize(w);
  if (domain == TimeDomain::kDiscrete) return solve_lyapunov_doubling(a, ws);
  return a.rows() <= kKroneckerLimit ? solve_lyapunov_kronecker(a, ws, domain)
                                     : solve_lyapunov_schur(a, ws, domain);
}

RiccatiStep riccati_step(const AreProblem& p, const Matrix& x_next) {
  const Matrix r = p.D.transpose() * p.D + p.B.transpose() * x_next * p.B;
  const Matrix s = p.B.transpose() * x_next * p.A + p.D.transpose() * p.C;
  RiccatiStep out;
  Eigen::LLT<Matrix> llt(r);
  if (llt.info() != Eigen::Success) fail(ErrorCode::kInvalidArgument, "DᵀD + BᵀXB not PD");
  out.F = -llt.solve(s);
  out.X = symmetrize(p.A.transpose() * x_next * p.A + p.C.transpose() * p.C + s.transpose() * out.F);
  return out;
}

std::vector<RiccatiStep> riccati_recursion_finite(const AreProblem& p, const Matrix& terminal,
                                                  int horizon) {
  check_problem(p);
  if (horizon < 1) fail(ErrorCode::kInvalidArgument, "horizon must be at least one step");
  const Eigen::Index n = p.A.rows();
  if (terminal.rows() != n || terminal.cols() != n) {
    fail(ErrorCode::kDimensionMismatch, "terminal weight must be n x n");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(terminal));
  if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, terminal.norm()) ||
      (terminal - terminal.transpose()).norm() > 1e-12 * std::max(1.0, terminal.norm())) {
    fail(ErrorCode::kInvalidArgument, "terminal weight must be symmetric PSD");
  }
  std::vector<RiccatiStep> out(static_cast<size_t>(horizon));
  Matrix x = terminal;
  for (int t = horizon - 1; t >= 0; --t) {
    out[static_cast<size_t>(t)] = riccati_step(p, x);
    x = out[static_cast<size_t>(t)].X;
  }
  return out;
}

}  // namespace lambda_lqg
