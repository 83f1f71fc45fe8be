#include "ddlqr/conic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "ddlqr/error.hpp"

namespace ddlqr {

// ---------------------------------------------------------------- expressions

Affine::Affine(Matrix offset, Matrix coef) : offset_(std::move(offset)), coef_(std::move(coef)) {
  if (coef_.rows() != offset_.size()) {
    throw Error(ErrorCode::InvalidArgument, "Affine: coefficient rows must equal rows*cols");
  }
}

Affine::Affine(const Matrix& constant) : offset_(constant), coef_(constant.size(), 0) {}

Matrix Affine::value(const Vector& y) const {
  if (y.size() < vars()) {
    throw Error(ErrorCode::InvalidArgument, "Affine::value: decision vector too short");
  }
  return offset_ + unvec(Vector(coef_ * y.head(vars())), rows(), cols());
}

Affine Affine::transpose() const {
  const Eigen::Index r = rows();
  const Eigen::Index c = cols();
  Matrix coef(coef_.rows(), coef_.cols());
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) coef.row(j + c * i) = coef_.row(i + r * j);
  }
  return {offset_.transpose(), coef};
}

Affine Affine::padded(Eigen::Index vars) const {
  if (vars <= this->vars()) return *this;
  Matrix coef = Matrix::Zero(coef_.rows(), vars);
  coef.leftCols(this->vars()) = coef_;
  return {offset_, coef};
}

namespace {

void require_same_shape(const Affine& a, const Affine& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::InvalidArgument, std::string("Affine ") + op + ": shape mismatch");
  }
}

// Applies f to the offset and to every coefficient matrix.
template <typename F>
Affine map_linear(const Affine& a, Eigen::Index out_rows, Eigen::Index out_cols, F f) {
  Matrix coef(out_rows * out_cols, a.vars());
  for (Eigen::Index i = 0; i < a.vars(); ++i) {
    coef.col(i) = vec(Matrix(f(unvec(Vector(a.coef().col(i)), a.rows(), a.cols()))));
  }
  return {Matrix(f(a.offset())), coef};
}

}  // namespace

Affine operator+(const Affine& a, const Affine& b) {
  require_same_shape(a, b, "+");
  const Eigen::Index v = std::max(a.vars(), b.vars());
  return {a.offset() + b.offset(), a.padded(v).coef() + b.padded(v).coef()};
}

Affine operator-(const Affine& a) { return {-a.offset(), -a.coef()}; }

Affine operator-(const Affine& a, const Affine& b) { return a + (-b); }

Affine operator+(const Affine& a, const Matrix& b) { return a + Affine(b); }

Affine operator+(const Matrix& a, const Affine& b) { return Affine(a) + b; }

Affine operator*(double s, const Affine& a) { return {s * a.offset(), s * a.coef()}; }

Affine operator*(const Matrix& l, const Affine& a) {
  if (l.cols() != a.rows()) throw Error(ErrorCode::InvalidArgument, "Affine *: shape mismatch");
  return map_linear(a, l.rows(), a.cols(), [&](const Matrix& m) { return Matrix(l * m); });
}

Affine operator*(const Affine& a, const Matrix& r) {
  if (a.cols() != r.rows()) throw Error(ErrorCode::InvalidArgument, "Affine *: shape mismatch");
  return map_linear(a, a.rows(), r.cols(), [&](const Matrix& m) { return Matrix(m * r); });
}

Affine trace(const Affine& a) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::InvalidArgument, "trace: not square");
  return map_linear(a, 1, 1, [](const Matrix& m) { return Matrix::Constant(1, 1, m.trace()); });
}

Affine block(const std::vector<std::vector<Affine>>& rows) {
  if (rows.empty() || rows.front().empty()) {
    throw Error(ErrorCode::InvalidArgument, "block: empty layout");
  }
  std::vector<Eigen::Index> heights, widths;
  Eigen::Index vars = 0;
  for (const auto& row : rows) {
    if (row.size() != rows.front().size()) {
      throw Error(ErrorCode::InvalidArgument, "block: ragged layout");
    }
    heights.push_back(row.front().rows());
    for (const Affine& b : row) {
      if (b.rows() != heights.back()) throw Error(ErrorCode::InvalidArgument, "block: row heights");
      vars = std::max(vars, b.vars());
    }
  }
  for (const Affine& b : rows.front()) widths.push_back(b.cols());
  Eigen::Index total_r = 0, total_c = 0;
  for (auto h : heights) total_r += h;
  for (auto w : widths) total_c += w;

  Matrix offset = Matrix::Zero(total_r, total_c);
  Matrix coef = Matrix::Zero(total_r * total_c, vars);
  Eigen::Index r0 = 0;
  for (std::size_t bi = 0; bi < rows.size(); ++bi) {
    Eigen::Index c0 = 0;
    for (std::size_t bj = 0; bj < widths.size(); ++bj) {
      const Affine& b = rows[bi][bj];
      if (b.cols() != widths[bj]) throw Error(ErrorCode::InvalidArgument, "block: column widths");
      offset.block(r0, c0, b.rows(), b.cols()) = b.offset();
      for (Eigen::Index j = 0; j < b.cols(); ++j) {
        for (Eigen::Index i = 0; i < b.rows(); ++i) {
          coef.row((r0 + i) + total_r * (c0 + j)).head(b.vars()) = b.coef().row(i + b.rows() * j);
        }
      }
      c0 += widths[bj];
    }
    r0 += heights[bi];
  }
  return {offset, coef};
}

// ---------------------------------------------------------------- problem

void ConicProblem::validate() const {
  const Eigen::Index n = vars();
  if (E.cols() != n && E.size() != 0) {
    throw Error(ErrorCode::InvalidArgument, "conic: E has the wrong number of columns");
  }
  if (E.rows() != e.size()) throw Error(ErrorCode::InvalidArgument, "conic: E and e disagree");
  for (const LmiBlock& b : blocks) {
    const Eigen::Index d = b.dim();
    if (b.F0.cols() != d || b.F.rows() != d * d || b.F.cols() != n) {
      throw Error(ErrorCode::InvalidArgument, "conic: block dimensions are inconsistent");
    }
    if (!is_symmetric(b.F0, 1e-12)) throw Error(ErrorCode::InvalidArgument, "conic: F0 asymmetric");
    for (Eigen::Index i = 0; i < n; ++i) {
      const Matrix fi = unvec(Vector(b.F.col(i)), d, d);
      if ((fi - fi.transpose()).norm() > 1e-12 * std::max(1.0, fi.norm())) {
        throw Error(ErrorCode::InvalidArgument, "conic: coefficient matrix asymmetric");
      }
    }
  }
  if (!c.allFinite() || !E.allFinite() || !e.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "conic: non-finite data");
  }
}

std::string to_string(ConicStatus s) {
  switch (s) {
    case ConicStatus::Optimal: return "optimal";
    case ConicStatus::Infeasible: return "infeasible";
    case ConicStatus::MaxIter: return "max_iter";
    case ConicStatus::Numerical: return "numerical";
  }
  return "unknown";
}

void dump(std::ostream& os, const ConicProblem& prob) {
  const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, " ", "\n", "  ", "");
  os << "variables " << prob.vars() << "\n";
  os << "minimize c0 + c^T y\nc0 " << prob.c0 << "\nc\n" << prob.c.transpose().format(fmt) << "\n";
  os << "equalities " << prob.E.rows() << "\n";
  for (Eigen::Index r = 0; r < prob.E.rows(); ++r) {
    os << "  row " << r << ": rhs " << prob.e(r) << " coef";
    for (Eigen::Index i = 0; i < prob.E.cols(); ++i) {
      if (prob.E(r, i) != 0.0) os << " " << i << ":" << prob.E(r, i);
    }
    os << "\n";
  }
  os << "blocks " << prob.blocks.size() << "\n";
  for (std::size_t j = 0; j < prob.blocks.size(); ++j) {
    const LmiBlock& b = prob.blocks[j];
    os << "block " << j << " psd " << b.dim() << "\nF0\n" << b.F0.format(fmt) << "\n";
    for (Eigen::Index i = 0; i < b.F.cols(); ++i) {
      if (b.F.col(i).isZero(0.0)) continue;
      os << "F" << i << "\n" << unvec(Vector(b.F.col(i)), b.dim(), b.dim()).format(fmt) << "\n";
    }
  }
}

// ---------------------------------------------------------------- builder

Affine ProblemBuilder::symmetric(Eigen::Index n) {
  const Eigen::Index k = vech_size(n);
  Matrix coef = Matrix::Zero(n * n, vars_ + k);
  Eigen::Index idx = vars_;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = j; i < n; ++i) {
      coef(i + n * j, idx) = 1.0;
      coef(j + n * i, idx) = 1.0;
      ++idx;
    }
  }
  vars_ += k;
  return {Matrix::Zero(n, n), coef};
}

Affine ProblemBuilder::matrix(Eigen::Index rows, Eigen::Index cols) {
  Matrix coef = Matrix::Zero(rows * cols, vars_ + rows * cols);
  coef.rightCols(rows * cols).setIdentity();
  vars_ += rows * cols;
  return {Matrix::Zero(rows, cols), coef};
}

void ProblemBuilder::minimize(const Affine& f) {
  if (f.rows() != 1 || f.cols() != 1) throw Error(ErrorCode::InvalidArgument, "objective not scalar");
  objective_ = f;
}

void ProblemBuilder::maximize(const Affine& f) { minimize(-f); }

void ProblemBuilder::equal(const Affine& lhs, const Matrix& rhs) {
  if (lhs.rows() != rhs.rows() || lhs.cols() != rhs.cols()) {
    throw Error(ErrorCode::InvalidArgument, "equal: shape mismatch");
  }
  equalities_.emplace_back(lhs, rhs);
}

void ProblemBuilder::psd(const Affine& m) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::InvalidArgument, "psd: not square");
  lmis_.push_back(m);
}

ConicProblem ProblemBuilder::build() const {
  ConicProblem p;
  const Affine obj = objective_.padded(vars_);
  p.c = obj.coef().row(0).transpose();
  p.c0 = obj.offset()(0, 0);
  Eigen::Index rows = 0;
  for (const auto& eq : equalities_) rows += eq.first.offset().size();
  p.E = Matrix::Zero(rows, vars_);
  p.e = Vector::Zero(rows);
  Eigen::Index r = 0;
  for (const auto& [lhs, rhs] : equalities_) {
    const Affine l = lhs.padded(vars_);
    const Eigen::Index k = l.offset().size();
    p.E.middleRows(r, k) = l.coef();
    p.e.segment(r, k) = vec(Matrix(rhs - l.offset()));
    r += k;
  }
  for (const Affine& m : lmis_) {
    const Affine l = m.padded(vars_);
    p.blocks.push_back({symmetrize(l.offset()), l.coef()});
  }
  p.validate();
  return p;
}

// ---------------------------------------------------------------- solver

namespace {

constexpr double kRangeTol = 1e-10;  // block range compression, relative
constexpr double kRankTol = 1e-11;   // variable and equality reduction, relative
constexpr double kStepFraction = 0.98;

Matrix orthonormal_range(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return Matrix(m.rows(), 0);
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
  const Vector& s = svd.singularValues();
  const double cut = rel_tol * std::max(s(0), 1e-300);
  Eigen::Index r = 0;
  while (r < s.size() && s(r) > cut) ++r;
  return svd.matrixU().leftCols(r);
}

void normalize_rows(Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double r = m.row(i).norm();
    if (r > 0) m.row(i) /= r;
  }
}

// Equivalent problem min cw^T w s.t. G_j0 + sum_i w_i G_ji >= 0, where
// y = y0 + T w eliminates the equalities and every variable direction no
// constraint or objective sees, and each block is restricted to the range
// its data can reach.
struct Reduced {
  Vector y0;
  Matrix T;                  // vars x k
  Vector cw;                 // objective in w, scaled by 1/cscale
  double cscale = 1.0;
  std::vector<Matrix> basis; // d_j x r_j
  std::vector<double> bscale;
  std::vector<Matrix> G0;    // r_j x r_j
  std::vector<Matrix> G;     // r_j^2 x k
  bool unbounded = false;
  bool inconsistent = false;
};

Reduced reduce(const ConicProblem& prob) {
  Reduced red;
  const Eigen::Index n = prob.vars();

  // Block ranges: every F_ji and F_j0 maps into span(basis_j).
  std::vector<Matrix> f0(prob.blocks.size()), fc(prob.blocks.size());
  for (std::size_t j = 0; j < prob.blocks.size(); ++j) {
    const LmiBlock& b = prob.blocks[j];
    const Eigen::Index d = b.dim();
    Matrix wide(d, d * (n + 1));
    wide.leftCols(d) = b.F0;
    for (Eigen::Index i = 0; i < n; ++i) wide.middleCols(d * (i + 1), d) = unvec(Vector(b.F.col(i)), d, d);
    Matrix u = orthonormal_range(wide, kRangeTol);
    if (u.cols() == 0) u = Matrix::Identity(d, d);  // constant zero block: keep it whole
    const Eigen::Index r = u.cols();
    f0[j] = symmetrize(Matrix(u.transpose() * b.F0 * u));
    fc[j].resize(r * r, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Matrix fi = unvec(Vector(b.F.col(i)), d, d);
      fc[j].col(i) = vec(symmetrize(Matrix(u.transpose() * fi * u)));
    }
    red.basis.push_back(std::move(u));
  }

  // Directions invisible to objective, equalities and blocks are dropped.
  Eigen::Index rows = prob.E.rows() + 1;
  for (const Matrix& c : fc) rows += c.rows();
  Matrix all(rows, n);
  all.topRows(prob.E.rows()) = prob.E;
  all.row(prob.E.rows()) = prob.c.transpose();
  Eigen::Index r0 = prob.E.rows() + 1;
  for (const Matrix& c : fc) {
    all.middleRows(r0, c.rows()) = c;
    r0 += c.rows();
  }
  normalize_rows(all);
  const Matrix v = orthonormal_range(Matrix(all.transpose()), kRankTol);  // n x r

  // Equalities: orthonormalize the rows of E V and solve for the particular part.
  Matrix ev = prob.E * v;
  Vector ee = prob.e;
  for (Eigen::Index i = 0; i < ev.rows(); ++i) {
    const double s = ev.row(i).norm();
    if (s > 0) {
      ev.row(i) /= s;
      ee(i) /= s;
    } else if (std::abs(ee(i)) > 1e-12 * (1.0 + prob.e.norm())) {
      red.inconsistent = true;
    }
  }
  Vector z0 = Vector::Zero(v.cols());
  Matrix zfree = Matrix::Identity(v.cols(), v.cols());
  if (ev.rows() > 0 && v.cols() > 0) {
    Eigen::JacobiSVD<Matrix> svd(ev, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    const double cut = kRankTol * std::max(s.size() ? s(0) : 0.0, 1e-300);
    Eigen::Index k = 0;
    while (k < s.size() && s(k) > cut) ++k;
    const Matrix uk = svd.matrixU().leftCols(k);
    const Vector proj = uk.transpose() * ee;
    if ((ee - uk * proj).norm() > 1e-9 * (1.0 + ee.norm())) red.inconsistent = true;
    z0 = svd.matrixV().leftCols(k) * (proj.array() / s.head(k).array()).matrix();
    zfree = svd.matrixV().rightCols(v.cols() - k);
  }
  red.y0 = v * z0;
  red.T = v * zfree;
  const Eigen::Index kw = red.T.cols();

  // Objective and blocks in w, each scaled to unit size.
  const Vector cw = red.T.transpose() * prob.c;
  red.cscale = std::max(1.0, cw.lpNorm<Eigen::Infinity>());
  red.cw = cw / red.cscale;
  Matrix seen = Matrix::Zero(0, kw);
  for (std::size_t j = 0; j < prob.blocks.size(); ++j) {
    const Eigen::Index r = red.basis[j].cols();
    Matrix g0 = f0[j] + unvec(Vector(fc[j] * red.y0), r, r);
    Matrix g = fc[j] * red.T;
    double s = 0.0;
    for (Eigen::Index i = 0; i < kw; ++i) s = std::max(s, g.col(i).norm());
    if (s == 0.0) s = std::max(1.0, g0.norm());
    red.bscale.push_back(s);
    red.G0.push_back(symmetrize(Matrix(g0 / s)));
    red.G.push_back(g / s);
    Matrix stacked(seen.rows() + g.rows(), kw);
    stacked << seen, g / s;
    seen = std::move(stacked);
  }
  if (kw > 0) {
    normalize_rows(seen);
    const Eigen::Index rank = seen.rows() ? numerical_rank(seen, kRankTol) : 0;
    red.unbounded = rank < kw;
  }
  return red;
}

struct Scaling {
  Matrix R;     // W = R R^T maps S to X
  Matrix Rinv;
  Vector lam;   // R^T S R = R^-1 X R^-T = diag(lam)
};

bool nt_scaling(const Matrix& s, const Matrix& x, Scaling& out) {
  const Eigen::LLT<Matrix> ls(s), lx(x);
  if (ls.info() != Eigen::Success || lx.info() != Eigen::Success) return false;
  const Matrix lsm = ls.matrixL();
  const Matrix lxm = lx.matrixL();
  Eigen::JacobiSVD<Matrix> svd(Matrix(lsm.transpose() * lxm), Eigen::ComputeFullU);
  out.lam = svd.singularValues();
  if (!(out.lam.minCoeff() > 0.0)) return false;
  const Vector sq = out.lam.cwiseSqrt();
  out.R = lsm.transpose().triangularView<Eigen::Upper>().solve(Matrix(svd.matrixU() * sq.asDiagonal()));
  out.Rinv = sq.cwiseInverse().asDiagonal() * svd.matrixU().transpose() * lsm.transpose();
  return out.R.allFinite() && out.Rinv.allFinite();
}

// Largest a <= 1/fraction with diag(lam) + a D >= 0.
double max_step(const Vector& lam, const Matrix& d) {
  const Vector is = lam.cwiseSqrt().cwiseInverse();
  const Matrix m = symmetrize(Matrix(is.asDiagonal() * d * is.asDiagonal()));
  const double mn = Eigen::SelfAdjointEigenSolver<Matrix>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
  return mn >= 0 ? 1e30 : -1.0 / mn;
}

// Solves lam o M = t (Jordan product) for symmetric M.
Matrix jordan_solve(const Vector& lam, const Matrix& t) {
  Matrix m(t.rows(), t.cols());
  for (Eigen::Index j = 0; j < t.cols(); ++j) {
    for (Eigen::Index i = 0; i < t.rows(); ++i) m(i, j) = 2.0 * t(i, j) / (lam(i) + lam(j));
  }
  return m;
}

Matrix apply(const Matrix& g, const Vector& w, Eigen::Index r) {
  return unvec(Vector(g * w), r, r);
}

}  // namespace

ConicSolution solve(const ConicProblem& prob, const SolverSettings& settings) {
  if (!(settings.tolerance > 0)) throw Error(ErrorCode::InvalidArgument, "solve: tolerance must be > 0");
  prob.validate();
  const Reduced red = reduce(prob);
  ConicSolution sol;
  sol.y = red.y0;
  if (red.inconsistent) {
    sol.status = ConicStatus::Infeasible;
    sol.detail = "equality constraints are inconsistent";
    return sol;
  }
  if (red.unbounded) {
    sol.status = ConicStatus::Infeasible;
    sol.detail = "dual infeasible: the objective decreases along a direction no constraint bounds";
    return sol;
  }

  const std::size_t nb = red.G0.size();
  const Eigen::Index kw = red.T.cols();
  std::vector<Eigen::Index> dim(nb);
  double nu = 0.0;
  for (std::size_t j = 0; j < nb; ++j) {
    dim[j] = red.G0[j].rows();
    nu += double(dim[j]);
  }

  Vector w = Vector::Zero(kw);
  std::vector<Matrix> s(nb), x(nb);
  double g0max = 0.0;
  for (std::size_t j = 0; j < nb; ++j) {
    const double d = double(dim[j]);
    const double xi = std::max({10.0, std::sqrt(d), red.G0[j].norm()});
    s[j] = xi * Matrix::Identity(dim[j], dim[j]);
    x[j] = std::max(10.0, std::sqrt(d)) * Matrix::Identity(dim[j], dim[j]);
    g0max = std::max(g0max, red.G0[j].norm());
  }

  // Iterate with the smallest KKT residual, returned when the method breaks down.
  struct Snapshot {
    double merit = 1e300;
    Vector w;
    std::vector<Matrix> s, x;
    double pres = 0, dres = 0, gap = 0;
  } best;

  auto finish = [&](ConicStatus status, std::string detail) {
    if (status == ConicStatus::Numerical && best.merit < 1e300) {
      w = best.w;
      s = best.s;
      x = best.x;
      sol.primal_residual = best.pres;
      sol.dual_residual = best.dres;
      sol.gap = best.gap;
    }
    sol.status = status;
    sol.detail = std::move(detail);
    sol.y = red.y0 + red.T * w;
    sol.objective = prob.c.dot(sol.y) + prob.c0;
    Vector adj = Vector::Zero(prob.vars());
    sol.X.clear();
    for (std::size_t j = 0; j < nb; ++j) {
      const Matrix xo = (red.cscale / red.bscale[j]) * red.basis[j] * x[j] * red.basis[j].transpose();
      const LmiBlock& b = prob.blocks[j];
      adj += b.F.transpose() * vec(xo);
      sol.X.push_back(symmetrize(xo));
    }
    if (prob.E.rows() > 0) {
      sol.lambda = prob.E.transpose().completeOrthogonalDecomposition().solve(Vector(prob.c - adj));
    } else {
      sol.lambda.resize(0);
    }
    return sol;
  };

  for (int it = 0;; ++it) {
    sol.iterations = it;
    // Residuals of the reduced problem.
    std::vector<Matrix> rp(nb);
    Vector rd = red.cw;
    double rp_norm = 0.0, xs = 0.0, dobj = 0.0, dterms = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      const Matrix gw = apply(red.G[j], w, dim[j]);
      rp[j] = symmetrize(Matrix(red.G0[j] + gw - s[j]));
      rp_norm += rp[j].squaredNorm();
      const Vector gx = red.G[j].transpose() * vec(x[j]);
      dterms = std::max(dterms, gx.norm());
      rd -= gx;
      xs += (x[j] * s[j]).trace();
      dobj -= (x[j] * red.G0[j]).trace();
    }
    rp_norm = std::sqrt(rp_norm);
    const double pobj = red.cw.dot(w);
    const double mu = nu > 0 ? xs / nu : 0.0;
    // The dual residual is relative to the size of the terms being summed:
    // roundoff in a sum scales with its terms, not with its result.
    sol.primal_residual = rp_norm / (1.0 + g0max);
    sol.dual_residual = rd.norm() / (1.0 + std::max(red.cw.norm(), dterms));
    sol.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
    const double compl_gap = xs / (1.0 + std::abs(pobj) + std::abs(dobj));
    sol.gap = std::max(sol.gap, compl_gap);
    if (settings.verbose) {
      std::fprintf(stderr, "%3d pobj %+.10e dobj %+.10e pres %.2e dres %.2e gap %.2e mu %.2e\n", it,
                   pobj, dobj, sol.primal_residual, sol.dual_residual, sol.gap, mu);
    }

    if (sol.primal_residual <= settings.tolerance && sol.dual_residual <= settings.tolerance &&
        sol.gap <= settings.tolerance) {
      return finish(ConicStatus::Optimal, "");
    }
    const double merit = std::max({sol.primal_residual, sol.dual_residual, sol.gap});
    if (merit < best.merit) best = {merit, w, s, x, sol.primal_residual, sol.dual_residual, sol.gap};
    // Farkas certificates.
    if (dobj > 0) {
      const double cert = (red.cw - rd).norm() / dobj;
      if (cert <= settings.tolerance) {
        return finish(ConicStatus::Infeasible, "primal infeasible: dual ray certificate");
      }
    }
    if (pobj < 0) {
      double worst = 0.0;
      for (std::size_t j = 0; j < nb; ++j) {
        worst = std::max(worst, -min_eigenvalue_sym(apply(red.G[j], w, dim[j])));
      }
      if (worst / -pobj <= settings.tolerance && w.norm() > 1e8) {
        return finish(ConicStatus::Infeasible, "dual infeasible: primal ray certificate");
      }
    }
    if (it >= settings.max_iterations) {
      return finish(ConicStatus::MaxIter, "iteration limit reached");
    }

    // Scaled coefficient matrices. The Newton system H dw = A~^T b - rd with
    // H = A~^T A~ is solved through a QR factorization of A~, so the
    // conditioning is that of A~ rather than its square.
    std::vector<Scaling> sc(nb);
    std::vector<Matrix> gt(nb);
    Eigen::Index total = 0;
    for (std::size_t j = 0; j < nb; ++j) {
      if (!nt_scaling(s[j], x[j], sc[j])) {
        return finish(ConicStatus::Numerical, "iterates lost positive definiteness");
      }
      gt[j].resize(dim[j] * dim[j], kw);
      for (Eigen::Index i = 0; i < kw; ++i) {
        const Matrix gi = unvec(Vector(red.G[j].col(i)), dim[j], dim[j]);
        gt[j].col(i) = vec(Matrix(sc[j].R.transpose() * gi * sc[j].R));
      }
      total += gt[j].rows();
    }
    Matrix at(total, kw);
    for (std::size_t j = 0, r = 0; j < nb; r += gt[j].rows(), ++j) at.middleRows(r, gt[j].rows()) = gt[j];
    const Eigen::HouseholderQR<Matrix> qr(at);
    const auto rtri = qr.matrixQR().topRows(kw).triangularView<Eigen::Upper>();
    {
      const Vector d = qr.matrixQR().diagonal().cwiseAbs();
      if (kw > 0 && !(d.minCoeff() > 1e-14 * d.maxCoeff())) {
        return finish(ConicStatus::Numerical, "Newton system is singular");
      }
    }
    auto newton = [&](const Vector& b, const Vector& rdv) -> Vector {
      if (kw == 0) return Vector(0);
      const Vector qb = (qr.householderQ().transpose() * b).head(kw);
      const Vector t = rtri.transpose().solve(rdv);
      return rtri.solve(Vector(qb - t));
    };

    struct Dir {
      Vector dw;
      std::vector<Matrix> ds, dx, dst, dxt;  // plain and scaled
      double ap = 0.0, ad = 0.0;
    };
    // Solves G(dw) - dS = -rpv, G*(dX) = rdv, dX~ + dS~ = m.
    auto solve_once = [&](const std::vector<Matrix>& m, const std::vector<Matrix>& rpv,
                          const Vector& rdv) {
      Dir d;
      Vector b(total);
      std::vector<Matrix> rps(nb);
      for (std::size_t j = 0, r = 0; j < nb; r += gt[j].rows(), ++j) {
        rps[j] = sc[j].R.transpose() * rpv[j] * sc[j].R;
        b.segment(r, gt[j].rows()) = vec(Matrix(m[j] - rps[j]));
      }
      d.dw = newton(b, rdv);
      d.ds.resize(nb);
      d.dx.resize(nb);
      d.dst.resize(nb);
      d.dxt.resize(nb);
      for (std::size_t j = 0; j < nb; ++j) {
        d.dst[j] = symmetrize(Matrix(unvec(Vector(gt[j] * d.dw), dim[j], dim[j]) + rps[j]));
        d.dxt[j] = symmetrize(Matrix(m[j] - d.dst[j]));
        d.ds[j] = symmetrize(Matrix(sc[j].Rinv.transpose() * d.dst[j] * sc[j].Rinv));
        d.dx[j] = symmetrize(Matrix(sc[j].R * d.dxt[j] * sc[j].R.transpose()));
      }
      return d;
    };
    // One round of iterative refinement against the unscaled equations;
    // near the optimum the scaling is extreme and a single solve loses the
    // last digits the stopping test needs.
    auto direction = [&](const std::vector<Matrix>& m) {
      Dir d = solve_once(m, rp, rd);
      std::vector<Matrix> e1(nb), e3(nb);
      Vector e2 = -rd;
      for (std::size_t j = 0; j < nb; ++j) {
        e1[j] = -symmetrize(Matrix(d.ds[j] - apply(red.G[j], d.dw, dim[j]) - rp[j]));
        e2 += red.G[j].transpose() * vec(d.dx[j]);
        e3[j] = -symmetrize(Matrix(sc[j].Rinv * d.dx[j] * sc[j].Rinv.transpose() +
                                   sc[j].R.transpose() * d.ds[j] * sc[j].R - m[j]));
      }
      const Dir c = solve_once(e3, e1, Vector(-e2));
      d.dw += c.dw;
      d.ap = d.ad = 1e30;
      for (std::size_t j = 0; j < nb; ++j) {
        d.ds[j] += c.ds[j];
        d.dx[j] += c.dx[j];
        d.dst[j] += c.dst[j];
        d.dxt[j] += c.dxt[j];
        d.ap = std::min(d.ap, max_step(sc[j].lam, d.dst[j]));
        d.ad = std::min(d.ad, max_step(sc[j].lam, d.dxt[j]));
      }
      return d;
    };

    // Predictor.
    std::vector<Matrix> m_aff(nb);
    for (std::size_t j = 0; j < nb; ++j) m_aff[j] = Matrix((-sc[j].lam).asDiagonal());
    const Dir aff = direction(m_aff);
    const double ap_aff = std::min(1.0, aff.ap);
    const double ad_aff = std::min(1.0, aff.ad);
    double xs_aff = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      xs_aff += (Matrix(x[j] + ad_aff * aff.dx[j]) * Matrix(s[j] + ap_aff * aff.ds[j])).trace();
    }
    const double sigma = mu > 0 ? std::clamp(std::pow(std::max(xs_aff, 0.0) / xs, 3.0), 0.0, 1.0) : 0.0;

    // Corrector.
    std::vector<Matrix> m_cor(nb);
    for (std::size_t j = 0; j < nb; ++j) {
      const Vector& lam = sc[j].lam;
      Matrix t = sigma * mu * Matrix::Identity(dim[j], dim[j]);
      t.diagonal() -= lam.cwiseAbs2();
      t -= symmetrize(Matrix(aff.dxt[j] * aff.dst[j]));
      m_cor[j] = jordan_solve(lam, t);
    }
    const Dir dir = direction(m_cor);
    const double ap = std::min(1.0, kStepFraction * dir.ap);
    const double ad = std::min(1.0, kStepFraction * dir.ad);
    if (!dir.dw.allFinite() || ap < 1e-12 || ad < 1e-12) {
      return finish(ConicStatus::Numerical, "step length collapsed");
    }
    w += ap * dir.dw;
    for (std::size_t j = 0; j < nb; ++j) {
      s[j] = symmetrize(Matrix(s[j] + ap * dir.ds[j]));
      x[j] = symmetrize(Matrix(x[j] + ad * dir.dx[j]));
    }
  }
}

}  // namespace ddlqr
