#include "ddlqr/cl.hpp"

#include <sstream>

namespace ddlqr {

namespace {

constexpr double kFeasibilityTol = 1e-8;

CLPolicy reproject(const CLData& data, const Matrix& g) {
  const Eigen::Index n = data.n();
  return {g - data.xtilde_pinv() * (data.xtilde() * g - Matrix::Identity(n, n))};
}

}  // namespace

double feasibility_residual(const CLData& data, const CLPolicy& pol) {
  return (data.xtilde() * pol.G - Matrix::Identity(data.n(), data.n())).norm();
}

bool is_member(const CLData& data, const CLPolicy& pol) {
  return feasibility_residual(data, pol) <= kFeasibilityTol && is_hurwitz(pol.closed_loop(data));
}

CLPolicy particular_solution(const CLData& data, const Matrix& k) {
  Matrix rhs(data.m() + data.n(), data.n());
  rhs << -k, Matrix::Identity(data.n(), data.n());
  return {data.stacked_pinv() * rhs};
}

CLEvaluation policy_evaluation(const CLData& data, const Weights& w, const CLPolicy& pol,
                               bool with_gramian) {
  const Matrix acl = pol.closed_loop(data);
  if (!is_hurwitz(acl)) {
    throw Error(ErrorCode::NotStabilizing, "policy not stabilizing");
  }
  const Matrix ug = data.utilde() * pol.G;
  CLEvaluation ev;
  ev.P = solve_lyapunov(acl, Matrix(w.Q + ug.transpose() * w.R * ug));
  ev.cost = ev.P.trace();
  if (with_gramian) {
    ev.Y = solve_lyapunov_dual(acl, Matrix::Identity(data.n(), data.n()));
  }
  return ev;
}

CLPolicy policy_improvement(const CLData& data, const Weights& w, const Matrix& p) {
  const Matrix& xp = data.xtilde_pinv();
  const Matrix& upi = data.upi_pinv();
  const Matrix inner = data.utilde() * xp +
                       w.R.llt().solve(Matrix(upi.transpose())) * (p * data.xbar()).transpose();
  return {xp - upi * inner};
}

PiHistory policy_iteration(const CLData& data, const Weights& w, const CLPolicy& initial,
                           const PiConfig& cfg) {
  if (!is_member(data, initial)) {
    throw Error(ErrorCode::NotStabilizing, "policy_iteration: initial G is not stabilizing");
  }
  PiHistory out;
  Stopwatch clock;
  CLPolicy pol = initial;
  Matrix k = pol.gain(data);
  out.gains.push_back(k);
  out.policies.push_back(pol.G);
  out.wall_ns.push_back(0);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    CLEvaluation ev;
    try {
      ev = policy_evaluation(data, w, pol);
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "policy_iteration: closed loop lost stability at iteration " << it
          << "; K =\n" << k;
      throw Error(ErrorCode::NotStabilizing, msg.str());
    }
    CLPolicy next = policy_improvement(data, w, ev.P);
    const Matrix next_k = next.gain(data);
    out.values.push_back(ev.P);
    out.gains.push_back(next_k);
    out.policies.push_back(next.G);
    out.wall_ns.push_back(clock.elapsed_ns());
    const double change = (next_k - k).norm();
    pol = std::move(next);
    k = next_k;
    if (change <= cfg.tolerance) {
      out.converged = true;
      break;
    }
  }
  return out;
}

CareLs care_residual_ls(const CLData& data, const Weights& w, const Matrix& p) {
  const Eigen::Index t = data.samples();
  CareLs out;
  out.B = data.xbar() * data.upi_pinv();
  out.A = data.xbar() * (Matrix::Identity(t, t) - data.upi_pinv() * data.utilde()) *
          data.xtilde_pinv();
  const Matrix pb = p * out.B;
  out.residual = symmetrize(Matrix(out.A.transpose() * p + p * out.A -
                                   pb * w.R.llt().solve(pb.transpose()) + w.Q));
  return out;
}

ClCareOperator::ClCareOperator(const CLData& data, const Weights& w)
    : data_(&data), w_(w), r_llt_(w.R) {
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();
  // [U~; X~]^+ with columns reordered to match [X~; U~].
  Matrix s(data.samples(), n + m);
  s << data.stacked_pinv().rightCols(n), data.stacked_pinv().leftCols(m);
  xs_ = data.xtilde() * s;
  xbs_ = data.xbar() * s;
  us_ = data.utilde() * s;
}

CLCareView ClCareOperator::operator()(const Matrix& p) const {
  const Eigen::Index n = data_->n();
  const Eigen::Index m = data_->m();
  const Matrix cross = xs_.transpose() * p * xbs_;
  CLCareView v;
  v.J = symmetrize(Matrix(cross + cross.transpose() + us_.transpose() * w_.R * us_ +
                          xs_.transpose() * w_.Q * xs_));
  const Matrix j21 = v.J.bottomLeftCorner(m, n);
  v.gain = r_llt_.solve(j21);
  v.residual = symmetrize(Matrix(v.J.topLeftCorner(n, n) - j21.transpose() * v.gain));
  return v;
}

Matrix ClCareOperator::residual(const Matrix& p) const { return (*this)(p).residual; }

Matrix ClCareOperator::gain(const Matrix& p) const { return (*this)(p).gain; }

Matrix ClCareOperator::f_matrix(const Matrix& p) const {
  const Matrix& xt = data_->xtilde();
  const Matrix cross = xt.transpose() * p * data_->xbar();
  return symmetrize(Matrix(cross + cross.transpose() +
                           data_->utilde().transpose() * w_.R * data_->utilde() +
                           xt.transpose() * w_.Q * xt));
}

CLCareView care_residual_F(const CLData& data, const Weights& w, const Matrix& p) {
  return ClCareOperator(data, w)(p);
}

FlowTrajectory riccati_flow_cl(const CLData& data, const Weights& w, const Matrix& p0,
                               const FlowConfig& cfg) {
  const ClCareOperator op(data, w);
  return integrate_flow(
      p0, cfg, [&](const Matrix& p) { return op.residual(p); },
      [&](const Matrix& p) { return op.gain(p); });
}

ViHistory value_iteration_cl(const CLData& data, const Weights& w, const Matrix& p0,
                             const ViConfig& cfg) {
  const ClCareOperator op(data, w);
  return value_iterate(
      p0, cfg, [&](const Matrix& p) { return op.residual(p); },
      [&](const Matrix& p) { return op.gain(p); });
}

double lqr_cost(const CLData& data, const Weights& w, const CLPolicy& pol) {
  if (feasibility_residual(data, pol) > kFeasibilityTol) {
    throw Error(ErrorCode::InvalidArgument, "lqr_cost: G violates X~ G = I");
  }
  return policy_evaluation(data, w, pol).cost;
}

Matrix gradient(const CLData& data, const Weights& w, const CLPolicy& pol) {
  if (feasibility_residual(data, pol) > kFeasibilityTol) {
    throw Error(ErrorCode::InvalidArgument, "gradient: G violates X~ G = I");
  }
  const CLEvaluation ev = policy_evaluation(data, w, pol, true);
  const Matrix& u = data.utilde();
  return 2.0 * (u.transpose() * (w.R * (u * pol.G)) + data.xbar().transpose() * ev.P) * ev.Y;
}

FlowTrajectory projected_gradient_flow(const CLData& data, const Weights& w,
                                       const CLPolicy& initial, double alpha,
                                       const FlowConfig& cfg, double lambda) {
  if (alpha <= 0 || lambda < 0) {
    throw Error(ErrorCode::InvalidArgument, "projected_gradient_flow: need alpha > 0, lambda >= 0");
  }
  if (!is_member(data, initial)) {
    throw Error(ErrorCode::NotStabilizing, "projected_gradient_flow: initial G is not stabilizing");
  }
  const Matrix& proj = data.projector();
  auto rhs = [&](const Matrix& g) -> Matrix {
    const Matrix& u = data.utilde();
    const Matrix acl = data.xbar() * g;
    const Matrix ug = u * g;
    const Matrix p = solve_lyapunov(acl, Matrix(w.Q + ug.transpose() * w.R * ug));
    const Matrix y = solve_lyapunov_dual(acl, Matrix::Identity(data.n(), data.n()));
    return -alpha * proj * (2.0 * (u.transpose() * (w.R * ug) + data.xbar().transpose() * p) * y);
  };
  auto project = [&](Matrix& g) {
    g = reproject(data, g).G;
    if (!is_hurwitz(Matrix(data.xbar() * g))) {
      throw Error(ErrorCode::NotStabilizing, "projected_gradient_flow: closed loop not Hurwitz");
    }
  };

  // grad f_G lies in the row space of [U~; X~] (X_bar = A X~ + B U~), so the
  // smooth part never moves the kernel component N = Pi~ G, and f_G does not
  // depend on N. The regularizer therefore decouples exactly: N shrinks
  // along its own direction at rate alpha * lambda until it vanishes.
  const Matrix n0 = data.stacked_projector() * initial.G;
  const double n0_norm = n0.norm();
  FlowTrajectory out = integrate_flow(
      Matrix(initial.G - n0), cfg, rhs,
      [&](const Matrix& g) { return Matrix(-data.utilde() * g); }, project);
  for (std::size_t i = 0; i < out.states.size(); ++i) {
    if (n0_norm == 0.0) break;
    const double shrink =
        lambda > 0 ? std::max(0.0, 1.0 - alpha * lambda * out.times[i] / n0_norm) : 1.0;
    out.states[i] += shrink * n0;
  }
  return out;
}

}  // namespace ddlqr
