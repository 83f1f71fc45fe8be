#include "ddlqr/irl.hpp"

#include <optional>
#include <sstream>

namespace ddlqr {

namespace {

constexpr double kQrThreshold = 1e-10;

// Every system solved here is consistent on noise-free data, so scaling the
// rows to unit norm leaves the solution unchanged while late windows of an
// unstable trajectory no longer swamp the early ones.
Vector row_scale(const Matrix& phi) {
  Vector s(phi.rows());
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    const double r = phi.row(i).norm();
    s(i) = r > 0 ? 1.0 / r : 1.0;
  }
  return s;
}

// Column equilibration after the row scaling: a large gain inflates the
// E(K) block and would otherwise fool the rank test.
Vector col_scale(const Matrix& phi) {
  Vector s(phi.cols());
  for (Eigen::Index j = 0; j < phi.cols(); ++j) {
    const double c = phi.col(j).norm();
    s(j) = c > 0 ? 1.0 / c : 1.0;
  }
  return s;
}

// Evaluation plus the factorization of the scaled Phi, which l_matrix reuses.
struct Solved {
  IRLEvaluation ev;
  Vector scale, cols;
  Eigen::ColPivHouseholderQR<Matrix> qr;

  // Least-squares solution of the unscaled system Phi x = rhs.
  [[nodiscard]] Matrix solve(const Matrix& rhs) const {
    return cols.asDiagonal() * qr.solve(Matrix(scale.asDiagonal() * rhs));
  }
};

Solved solve_regression(const IRLData& data, const Weights& w, const Matrix& k) {
  const IRLRegression reg = build_regression(data, w, k);
  Solved out;
  out.scale = row_scale(reg.Phi);
  out.qr.setThreshold(kQrThreshold);
  const Matrix rows = out.scale.asDiagonal() * reg.Phi;
  out.cols = col_scale(rows);
  out.qr.compute(rows * out.cols.asDiagonal());
  if (out.qr.rank() < reg.Phi.cols()) {
    throw Error(ErrorCode::DataNotInformative, "data not informative (IRL)");
  }
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();
  const Eigen::Index vs = vech_size(n);
  IRLEvaluation& ev = out.ev;
  ev.theta = out.solve(reg.b);
  ev.P = symmetrize(unvech(Vector(ev.theta.head(vs))));
  ev.BtP = unvec(Vector(ev.theta.tail(m * n)), m, n);
  ev.residual = (reg.b - reg.Phi * ev.theta).norm();
  ev.b_norm = reg.b.norm();
  return out;
}

Matrix l_from(const IRLData& data, const Solved& s) {
  // PhiBar = Phi blockdiag(D^+, I) with Phi full column rank, so
  // Psi PhiBar^+ = D (Phi^+)_top. Phi Z = Gamma^xx is consistent because
  // Gamma^xx vec(M) is the right-hand side of the evaluation for M = M^T
  // and vanishes for M = -M^T.
  const Eigen::Index n = data.n();
  const Matrix z = s.solve(data.gamma_xx());
  const Matrix psi = data.duplication() * z.topRows(vech_size(n));
  const Vector id = vec(Matrix::Identity(n, n));
  return unvec(Vector(psi.transpose() * id), n, n);
}

}  // namespace

Matrix e_matrix(const IRLData& data, const Matrix& k) {
  const Eigen::Index n = data.n();
  return data.gamma_ux() + data.gamma_xx() * kron(Matrix::Identity(n, n), k.transpose());
}

IRLRegression build_regression(const IRLData& data, const Weights& w, const Matrix& k) {
  if (k.rows() != data.m() || k.cols() != data.n()) {
    throw Error(ErrorCode::InvalidArgument, "build_regression: K must be m x n");
  }
  const Eigen::Index t = data.samples();
  const Matrix e = e_matrix(data, k);
  IRLRegression reg;
  reg.K = k;
  reg.PhiBar.resize(t, data.gamma_dx().cols() + e.cols());
  reg.PhiBar << data.gamma_dx(), -2.0 * e;
  reg.Phi.resize(t, vech_size(data.n()) + e.cols());
  reg.Phi << data.gamma_dx() * data.duplication(), -2.0 * e;
  reg.b = -data.gamma_xx() * vec(Matrix(w.Q + k.transpose() * w.R * k));
  return reg;
}

IRLEvaluation policy_evaluation_irl(const IRLData& data, const Weights& w, const Matrix& k) {
  return solve_regression(data, w, k).ev;
}

bool certifies_stabilizing(const IRLEvaluation& ev) {
  return ev.P.allFinite() && min_eigenvalue_sym(ev.P) > 0.0;
}

PiHistory policy_iteration_irl(const IRLData& data, const Weights& w, const Matrix& k0,
                               const PiConfig& cfg) {
  PiHistory out;
  Stopwatch clock;
  const Eigen::LLT<Matrix> r_llt(w.R);
  Matrix k = k0;
  out.gains.push_back(k);
  out.wall_ns.push_back(0);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const IRLEvaluation ev = policy_evaluation_irl(data, w, k);
    if (!certifies_stabilizing(ev)) {
      std::ostringstream msg;
      msg << "policy_iteration_irl: value estimate not positive definite at iteration " << it
          << " (K not stabilizing); K =\n" << k;
      throw Error(ErrorCode::NotStabilizing, msg.str());
    }
    const Matrix next = r_llt.solve(ev.BtP);
    out.values.push_back(ev.P);
    out.gains.push_back(next);
    out.wall_ns.push_back(clock.elapsed_ns());
    const double change = (next - k).norm();
    k = next;
    if (change <= cfg.tolerance) {
      out.converged = true;
      break;
    }
  }
  return out;
}

Lse2::Lse2(const IRLData& data, const Matrix& r) : data_(&data), dup_(data.duplication()) {
  const Eigen::Index n = data.n();
  Matrix phi(data.samples(), vech_size(n) + data.m() * n);
  phi << data.gamma_xx() * dup_, 2.0 * data.gamma_ux() * kron(Matrix::Identity(n, n), r);
  scale_ = row_scale(phi);
  qr_.setThreshold(kQrThreshold);
  qr_.compute(scale_.asDiagonal() * phi);
  if (qr_.rank() < phi.cols()) {
    throw Error(ErrorCode::DataNotInformative, "data not informative (IRL)");
  }
}

Lse2Solution Lse2::solve(const Matrix& p) const {
  const Eigen::Index n = data_->n();
  const Eigen::Index m = data_->m();
  const Vector theta = qr_.solve(Vector(scale_.asDiagonal() * (data_->gamma_dx() * vec(p))));
  return {symmetrize(unvech(Vector(theta.head(vech_size(n))))),
          unvec(Vector(theta.tail(m * n)), m, n)};
}

Lse2Solution solve_lse2(const IRLData& data, const Matrix& r, const Matrix& p) {
  return Lse2(data, r).solve(p);
}

namespace {

Matrix residual_of(const Lse2Solution& s, const Weights& w) {
  return symmetrize(Matrix(s.H - s.Kplus.transpose() * w.R * s.Kplus + w.Q));
}

}  // namespace

Matrix care_residual_irl(const IRLData& data, const Weights& w, const Matrix& p) {
  return residual_of(solve_lse2(data, w.R, p), w);
}

FlowTrajectory riccati_flow_irl(const IRLData& data, const Weights& w, const Matrix& p0,
                                const FlowConfig& cfg) {
  const Lse2 lse(data, w.R);
  return integrate_flow(
      p0, cfg, [&](const Matrix& p) { return residual_of(lse.solve(p), w); },
      [&](const Matrix& p) { return lse.solve(p).Kplus; });
}

ViHistory value_iteration_irl(const IRLData& data, const Weights& w, const Matrix& p0,
                              const ViConfig& cfg) {
  const Lse2 lse(data, w.R);
  return value_iterate(
      p0, cfg, [&](const Matrix& p) { return residual_of(lse.solve(p), w); },
      [&](const Matrix& p) { return lse.solve(p).Kplus; });
}

Matrix l_matrix(const IRLData& data, const Weights& w, const Matrix& k) {
  return l_from(data, solve_regression(data, w, k));
}

Matrix gradient_irl(const IRLData& data, const Weights& w, const Matrix& k) {
  const Solved s = solve_regression(data, w, k);
  return 2.0 * (s.ev.BtP - w.R * k) * l_from(data, s);
}

FlowTrajectory gradient_flow_irl(const IRLData& data, const Weights& w, const Matrix& k0,
                                 double beta, const FlowConfig& cfg) {
  if (beta <= 0) {
    throw Error(ErrorCode::InvalidArgument, "gradient_flow_irl: need beta > 0");
  }
  auto rhs = [&](const Matrix& k) -> Matrix {
    // Past K0, a rank drop means the Lyapunov operator went singular, which
    // only happens once a trial stage has crossed the stability boundary.
    std::optional<Solved> solved;
    try {
      solved.emplace(solve_regression(data, w, k));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DataNotInformative) throw;
      throw Error(ErrorCode::NotStabilizing, "gradient_flow_irl: left the stabilizing set; use a smaller step");
    }
    const Solved& s = *solved;
    if (!certifies_stabilizing(s.ev)) {
      throw Error(ErrorCode::NotStabilizing,
                  "gradient_flow_irl: left the stabilizing set; use a smaller step");
    }
    return -2.0 * beta * (s.ev.BtP - w.R * k) * l_from(data, s);
  };
  if (!certifies_stabilizing(policy_evaluation_irl(data, w, k0))) {
    throw Error(ErrorCode::NotStabilizing, "gradient_flow_irl: initial K is not stabilizing");
  }
  return integrate_flow(k0, cfg, rhs, [](const Matrix& k) { return k; });
}

double f_i(const IRLData& data, Eigen::Index i, const Weights& w, const Matrix& p,
           const Matrix& wmat) {
  const Matrix rxx = data.r_xx(i);
  return (p * data.r_dx(i)).trace() + (w.Q * rxx).trace() -
         (wmat * w.R.llt().solve(wmat.transpose()) * rxx).trace() -
         2.0 * (wmat.transpose() * data.r_xu(i)).trace();
}

}  // namespace ddlqr
