#include "lambda_lqg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lambda_lqg/errors.hpp"

namespace lambda_lqg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "dimension-mismatch";
    case ErrorCode::kDomainMismatch: return "domain-mismatch";
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kUnsupportedRepresentation: return "unsupported-representation";
    case ErrorCode::kNoStabilizingSolution: return "no-stabilizing-solution";
    case ErrorCode::kIllPosed: return "ill-posed";
    case ErrorCode::kUnstable: return "unstable";
    case ErrorCode::kSizeLimit: return "size-limit";
    case ErrorCode::kSynthesisFailure: return "synthesis-failure";
    case ErrorCode::kConfig: return "config";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(to_string(code)) + ": " + what);
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

Matrix psd_sqrt(const Matrix& m) {
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  Vector d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return symmetrize(es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose());
}

Matrix psd_factor(const Matrix& m) {
  if (m.size() == 0) return m;
  Eigen::LLT<Matrix> llt(symmetrize(m));
  if (llt.info() == Eigen::Success) {
    Matrix u = llt.matrixU();
    return u;
  }
  // Singular PSD: rows sqrt(λ_k) v_kᵀ, with eigenvalues at round-off level
  // set to zero so that the factor exposes the numerical rank.
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  const double cutoff = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  Vector d = es.eigenvalues();
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = d(i) > cutoff ? std::sqrt(d(i)) : 0.0;
  return d.asDiagonal() * es.eigenvectors().transpose();
}

ComplexVector eigenvalues(const Matrix& a) {
  if (a.size() == 0) return {};
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues();
}

double spectral_radius(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  return eigenvalues(a).cwiseAbs().maxCoeff();
}

double spectral_abscissa(const Matrix& a) {
  if (a.size() == 0) return -std::numeric_limits<double>::infinity();
  return eigenvalues(a).real().maxCoeff();
}

bool is_schur_stable(const Matrix& a, double margin) {
  return spectral_radius(a) < 1.0 - margin;
}

bool is_hurwitz(const Matrix& a, double margin) {
  return spectral_abscissa(a) < -margin;
}

int numerical_rank(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& s = svd.singularValues();
  const double tol = rel_tol * std::max(1.0, s(0));
  return static_cast<int>((s.array() > tol).count());
}

namespace {

bool is_unstable_mode(std::complex<double> lambda, TimeDomain domain, double tol) {
  if (domain == TimeDomain::kContinuous) return lambda.real() >= -tol;
  return std::abs(lambda) >= 1.0 - tol;
}

bool pbh_full_rank(const Matrix& a, const Matrix& b, TimeDomain domain, double rel_tol) {
  const Eigen::Index n = a.rows();
  if (n == 0) return true;
  const ComplexVector ev = eigenvalues(a);
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (!is_unstable_mode(ev(k), domain, 1e-10)) continue;
    Eigen::MatrixXcd pencil(n, n + b.cols());
    pencil.leftCols(n) = a.cast<std::complex<double>>() -
                         ev(k) * Eigen::MatrixXcd::Identity(n, n);
    pencil.rightCols(b.cols()) = b.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pencil);
    const auto& sv = svd.singularValues();
    const double tol = rel_tol > 0.0
                           ? rel_tol
                           : static_cast<double>(n + b.cols()) * std::numeric_limits<double>::epsilon();
    if (sv(n - 1) <= tol * sv(0)) return false;
  }
  return true;
}

}  // namespace

bool is_stabilizable(const Matrix& a, const Matrix& b, TimeDomain domain, double rel_tol) {
  return pbh_full_rank(a, b, domain, rel_tol);
}

bool is_detectable(const Matrix& a, const Matrix& c, TimeDomain domain, double rel_tol) {
  return pbh_full_rank(a.transpose(), c.transpose(), domain, rel_tol);
}

Matrix observability_matrix(const Matrix& a, const Matrix& c) {
  const Eigen::Index n = a.rows();
  Matrix out(c.rows() * n, n);
  Matrix block = c;
  for (Eigen::Index k = 0; k < n; ++k) {
    out.middleRows(k * c.rows(), c.rows()) = block;
    block = block * a;
  }
  return out;
}

Matrix controllability_matrix(const Matrix& a, const Matrix& b) {
  return observability_matrix(a.transpose(), b.transpose()).transpose();
}

double relative_difference(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace lambda_lqg
