#include "ddlqr/system.hpp"

#include <complex>

namespace ddlqr {

namespace {

using CMatrix = Eigen::MatrixXcd;

// Rank of [A - lambda I; C] (stacked) or [A - lambda I, C] (side by side)
// evaluated at every eigenvalue of A that is not strictly stable.
bool pbh_full_rank(const Matrix& a, const Matrix& c, bool columns) {
  const Eigen::Index n = a.rows();
  const auto rep = spectral(a);
  for (const auto& lambda : rep.eigenvalues) {
    if (lambda.real() < -kHurwitzMargin) continue;
    CMatrix shifted = a.cast<std::complex<double>>();
    shifted.diagonal().array() -= lambda;
    CMatrix stacked;
    if (columns) {
      stacked.resize(n, n + c.cols());
      stacked << shifted, c.cast<std::complex<double>>();
    } else {
      stacked.resize(n + c.rows(), n);
      stacked << shifted, c.cast<std::complex<double>>();
    }
    Eigen::JacobiSVD<CMatrix> svd(stacked);
    const auto& s = svd.singularValues();
    const double scale = std::max(1.0, s(0));
    Eigen::Index rank = 0;
    while (rank < s.size() && s(rank) > 1e-9 * scale) ++rank;
    if (rank < n) return false;
  }
  return true;
}

}  // namespace

void validate_weights(const LinearSystem& sys) {
  const auto n = sys.A.rows();
  if (sys.A.cols() != n || sys.B.rows() != n || sys.Q.rows() != n || sys.Q.cols() != n ||
      sys.R.rows() != sys.B.cols() || sys.R.cols() != sys.B.cols()) {
    throw Error(ErrorCode::InvalidArgument, "LinearSystem: inconsistent dimensions");
  }
  if (!is_symmetric(sys.Q) || !is_symmetric(sys.R)) {
    throw Error(ErrorCode::InvalidArgument, "LinearSystem: weights must be symmetric");
  }
  if (min_eigenvalue_sym(sys.R) <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "LinearSystem: R must be positive definite");
  }
  if (min_eigenvalue_sym(sys.Q) < -1e-12 * std::max(1.0, sys.Q.norm())) {
    throw Error(ErrorCode::InvalidArgument, "LinearSystem: Q must be positive semidefinite");
  }
}

bool is_stabilizable(const Matrix& a, const Matrix& b) { return pbh_full_rank(a, b, true); }

bool is_detectable(const Matrix& a, const Matrix& q) {
  return pbh_full_rank(a, sym_sqrt(q), false);
}

bool satisfies_standing_assumption(const LinearSystem& sys) {
  return is_stabilizable(sys.A, sys.B) && is_detectable(sys.A, sys.Q);
}

Matrix sym_sqrt(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(s));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return symmetrize(Matrix(es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose()));
}

}  // namespace ddlqr
