#pragma once

// Dense linear-algebra kernels shared by every solver: structured reshapes,
// pseudoinverses and kernels, Lyapunov solves, spectral tests and the matrix
// exponential. Everything is templated on the scalar type and works on
// Eigen expressions.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "ddlqr/error.hpp"

namespace ddlqr {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// Singular values below this fraction of the largest one count as zero.
inline constexpr double kRankTolerance = 1e-8;
/// Eigenvalues with real part in (-kHurwitzMargin, inf) are not stable.
inline constexpr double kHurwitzMargin = 1e-9;

// ---------------------------------------------------------------------------
// Reshapes
// ---------------------------------------------------------------------------

/// Column-major stacking.
template <typename Derived>
[[nodiscard]] VectorX<typename Derived::Scalar> vec(const Eigen::MatrixBase<Derived>& m) {
  MatrixX<typename Derived::Scalar> tmp = m;
  return Eigen::Map<const VectorX<typename Derived::Scalar>>(tmp.data(), tmp.size());
}

template <typename Derived>
[[nodiscard]] MatrixX<typename Derived::Scalar> unvec(const Eigen::MatrixBase<Derived>& v,
                                                      Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) {
    throw Error(ErrorCode::InvalidArgument, "unvec: size mismatch");
  }
  VectorX<typename Derived::Scalar> tmp = v;
  return Eigen::Map<const MatrixX<typename Derived::Scalar>>(tmp.data(), rows, cols);
}

template <typename Derived>
[[nodiscard]] bool is_symmetric(const Eigen::MatrixBase<Derived>& m,
                                typename Derived::Scalar rel_tol = 1e-8) {
  if (m.rows() != m.cols()) return false;
  const auto scale = std::max(m.norm(), typename Derived::Scalar(1e-300));
  return (m - m.transpose()).norm() <= rel_tol * scale;
}

template <typename Derived>
[[nodiscard]] MatrixX<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& m) {
  return (m + m.transpose()) / typename Derived::Scalar(2);
}

/// Lower triangle stacked column by column; rejects asymmetric input.
template <typename Derived>
[[nodiscard]] VectorX<typename Derived::Scalar> vech(const Eigen::MatrixBase<Derived>& m) {
  if (!is_symmetric(m)) {
    throw Error(ErrorCode::InvalidArgument, "vech: matrix is not symmetric");
  }
  const Eigen::Index n = m.rows();
  VectorX<typename Derived::Scalar> out(n * (n + 1) / 2);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) out(k++) = m(i, j);
  }
  return out;
}

template <typename Derived>
[[nodiscard]] MatrixX<typename Derived::Scalar> unvech(const Eigen::MatrixBase<Derived>& v) {
  const auto len = v.size();
  const auto n = static_cast<Eigen::Index>(std::lround((std::sqrt(8.0 * double(len) + 1.0) - 1.0) / 2.0));
  if (n * (n + 1) / 2 != len) {
    throw Error(ErrorCode::InvalidArgument, "unvech: length is not triangular");
  }
  MatrixX<typename Derived::Scalar> m(n, n);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      m(i, j) = v(k);
      m(j, i) = v(k);
      ++k;
    }
  }
  return m;
}

[[nodiscard]] inline Eigen::Index vech_size(Eigen::Index n) { return n * (n + 1) / 2; }

/// D with vec(P) = D vech(P) for symmetric P.
template <typename Scalar = double>
[[nodiscard]] MatrixX<Scalar> duplication_matrix(Eigen::Index n) {
  MatrixX<Scalar> d = MatrixX<Scalar>::Zero(n * n, vech_size(n));
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      d(i + j * n, k) = 1;
      d(j + i * n, k) = 1;
      ++k;
    }
  }
  return d;
}

/// C with C vec(M) = vec(M^T) for every m x n matrix M.
template <typename Scalar = double>
[[nodiscard]] MatrixX<Scalar> commutation_matrix(Eigen::Index m, Eigen::Index n) {
  MatrixX<Scalar> c = MatrixX<Scalar>::Zero(m * n, m * n);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      // M(i,j) sits at i + j*m in vec(M) and at j + i*n in vec(M^T).
      c(j + i * n, i + j * m) = 1;
    }
  }
  return c;
}

template <typename DerivedA, typename DerivedB>
[[nodiscard]] MatrixX<typename DerivedA::Scalar> kron(const Eigen::MatrixBase<DerivedA>& a,
                                                      const Eigen::MatrixBase<DerivedB>& b) {
  MatrixX<typename DerivedA::Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rank-revealing factorizations
// ---------------------------------------------------------------------------

template <typename Derived>
[[nodiscard]] Eigen::Index numerical_rank(const Eigen::MatrixBase<Derived>& m,
                                          double tol = kRankTolerance) {
  if (m.size() == 0) return 0;
  using Mat = MatrixX<typename Derived::Scalar>;
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0) return 0;
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > tol * s(0)) ++r;
  return r;
}

/// Moore-Penrose pseudoinverse via SVD.
template <typename Derived>
[[nodiscard]] MatrixX<typename Derived::Scalar> pinv(const Eigen::MatrixBase<Derived>& m,
                                                     double tol = kRankTolerance) {
  using Scalar = typename Derived::Scalar;
  using Mat = MatrixX<Scalar>;
  if (m.size() == 0) return Mat::Zero(m.cols(), m.rows());
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  VectorX<Scalar> inv = VectorX<Scalar>::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * s(0)) inv(i) = Scalar(1) / s(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// Orthonormal basis of ker(M); zero columns when the kernel is trivial.
template <typename Derived>
[[nodiscard]] MatrixX<typename Derived::Scalar> null_basis(const Eigen::MatrixBase<Derived>& m,
                                                           double tol = kRankTolerance) {
  using Mat = MatrixX<typename Derived::Scalar>;
  const Eigen::Index cols = m.cols();
  if (m.rows() == 0) return Mat::Identity(cols, cols);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  Eigen::Index r = 0;
  if (s.size() > 0 && s(0) > 0) {
    while (r < s.size() && s(r) > tol * s(0)) ++r;
  }
  return svd.matrixV().rightCols(cols - r);
}

/// I - M^+ M, the orthogonal projector onto ker(M). M must have full row rank.
template <typename Derived>
[[nodiscard]] MatrixX<typename Derived::Scalar> nullspace_projector(
    const Eigen::MatrixBase<Derived>& m, double tol = kRankTolerance) {
  using Mat = MatrixX<typename Derived::Scalar>;
  if (numerical_rank(m, tol) != m.rows()) {
    throw Error(ErrorCode::InvalidArgument, "nullspace_projector: matrix lacks full row rank");
  }
  Mat proj = Mat::Identity(m.cols(), m.cols()) - pinv(m, tol) * m;
  return symmetrize(proj);
}

// ---------------------------------------------------------------------------
// Spectra
// ---------------------------------------------------------------------------

struct SpectralReport {
  std::vector<std::complex<double>> eigenvalues;
  double abscissa = 0.0;  ///< largest real part
  bool hurwitz = false;   ///< abscissa < -kHurwitzMargin
  double margin = 0.0;    ///< -abscissa
};

template <typename Derived>
[[nodiscard]] SpectralReport spectral(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::InvalidArgument, "spectral: matrix is not square");
  }
  SpectralReport rep;
  if (m.rows() == 0) return rep;
  Eigen::EigenSolver<MatrixX<typename Derived::Scalar>> es(m, false);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::Numerical, "spectral: eigenvalue iteration did not converge");
  }
  rep.abscissa = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const auto ev = es.eigenvalues()(i);
    rep.eigenvalues.emplace_back(double(ev.real()), double(ev.imag()));
    rep.abscissa = std::max(rep.abscissa, double(ev.real()));
  }
  rep.hurwitz = rep.abscissa < -kHurwitzMargin;
  rep.margin = -rep.abscissa;
  return rep;
}

template <typename Derived>
[[nodiscard]] bool is_hurwitz(const Eigen::MatrixBase<Derived>& m, double margin = kHurwitzMargin) {
  return spectral(m).abscissa < -margin;
}

template <typename Derived>
[[nodiscard]] typename Derived::Scalar min_eigenvalue_sym(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<MatrixX<typename Derived::Scalar>> es(symmetrize(m),
                                                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

template <typename Derived>
[[nodiscard]] typename Derived::Scalar max_eigenvalue_sym(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() == 0) return 0;
  Eigen::SelfAdjointEigenSolver<MatrixX<typename Derived::Scalar>> es(symmetrize(m),
                                                                        Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

// ---------------------------------------------------------------------------
// Lyapunov equations
// ---------------------------------------------------------------------------

enum class LyapunovBackend { Vectorized, BartelsStewart };

namespace detail {

template <typename Scalar>
MatrixX<Scalar> lyapunov_vectorized(const MatrixX<Scalar>& a, const MatrixX<Scalar>& w) {
  const Eigen::Index n = a.rows();
  const MatrixX<Scalar> eye = MatrixX<Scalar>::Identity(n, n);
  const MatrixX<Scalar> at = a.transpose();
  const MatrixX<Scalar> op = kron(eye, at) + kron(at, eye);
  Eigen::FullPivLU<MatrixX<Scalar>> lu(op);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::Numerical, "solve_lyapunov: singular vectorized operator");
  }
  const VectorX<Scalar> p = lu.solve(-vec(w));
  return unvec(p, n, n);
}

// Complex Schur form A = U T U^H turns A^T P + P A = -W into
// T^H Y + Y T = -U^H W U, solved column by column.
template <typename Scalar>
MatrixX<Scalar> lyapunov_bartels_stewart(const MatrixX<Scalar>& a, const MatrixX<Scalar>& w) {
  using Complex = std::complex<Scalar>;
  using CMat = MatrixX<Complex>;
  const Eigen::Index n = a.rows();
  Eigen::ComplexSchur<MatrixX<Scalar>> schur(a);
  if (schur.info() != Eigen::Success) {
    throw Error(ErrorCode::Numerical, "solve_lyapunov: Schur decomposition failed");
  }
  const CMat& u = schur.matrixU();
  const CMat& t = schur.matrixT();
  const CMat c = -(u.adjoint() * w.template cast<Complex>() * u);
  const CMat th = t.adjoint();
  CMat y = CMat::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::Matrix<Complex, Eigen::Dynamic, 1> rhs = c.col(j);
    for (Eigen::Index k = 0; k < j; ++k) rhs -= y.col(k) * t(k, j);
    CMat lhs = th;
    lhs.diagonal().array() += t(j, j);
    y.col(j) = lhs.template triangularView<Eigen::Lower>().solve(rhs);
  }
  return (u * y * u.adjoint()).real();
}

}  // namespace detail

/// Symmetric P with A^T P + P A + W = 0 for Hurwitz A.
template <typename DerivedA, typename DerivedW>
[[nodiscard]] MatrixX<typename DerivedA::Scalar> solve_lyapunov(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedW>& w,
    LyapunovBackend backend = LyapunovBackend::Vectorized) {
  using Scalar = typename DerivedA::Scalar;
  if (a.rows() != a.cols() || w.rows() != a.rows() || w.cols() != a.cols()) {
    throw Error(ErrorCode::InvalidArgument, "solve_lyapunov: dimension mismatch");
  }
  if (!is_hurwitz(a)) {
    throw Error(ErrorCode::NotStabilizing, "solve_lyapunov: unstable closed loop");
  }
  const MatrixX<Scalar> am = a;
  const MatrixX<Scalar> wm = w;
  MatrixX<Scalar> p = backend == LyapunovBackend::Vectorized
                          ? detail::lyapunov_vectorized(am, wm)
                          : detail::lyapunov_bartels_stewart(am, wm);
  return symmetrize(p);
}

/// Y with A Y + Y A^T + W = 0 (controllability-type Gramian).
template <typename DerivedA, typename DerivedW>
[[nodiscard]] MatrixX<typename DerivedA::Scalar> solve_lyapunov_dual(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedW>& w) {
  const MatrixX<typename DerivedA::Scalar> at = a.transpose();
  return solve_lyapunov(at, w);
}

// ---------------------------------------------------------------------------
// Matrix exponential
// ---------------------------------------------------------------------------

/// Scaling and squaring with the degree-13 Pade approximant.
template <typename Derived>
[[nodiscard]] MatrixX<typename Derived::Scalar> expm(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Mat = MatrixX<Scalar>;
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::InvalidArgument, "expm: matrix is not square");
  }
  const Eigen::Index n = m.rows();
  if (n == 0) return Mat(0, 0);
  static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                 1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                 670442572800.0,      33522128640.0,       1323241920.0,
                                 40840800.0,          960960.0,            16380.0,
                                 182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;

  const Scalar norm1 = m.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm1 > theta13) s = std::max(0, int(std::ceil(std::log2(double(norm1) / theta13))));
  const Mat a = m / std::ldexp(Scalar(1), s);

  const Mat eye = Mat::Identity(n, n);
  const Mat a2 = a * a;
  const Mat a4 = a2 * a2;
  const Mat a6 = a4 * a2;
  const Mat u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2);
  const Mat u = a * (u_inner + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * eye);
  const Mat v_inner = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2);
  const Mat v = v_inner + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * eye;

  Mat r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < s; ++i) r = r * r;
  return r;
}

}  // namespace ddlqr
