#pragma once

// Closed-loop parameterization: the feedback u = -K x is represented through
// a data matrix G with [-K; I] = [U~; X~] G, so that A - BK = X_bar G.

#include "ddlqr/iterate.hpp"
#include "ddlqr/sim.hpp"
#include "ddlqr/system.hpp"

namespace ddlqr {

struct CLPolicy {
  Matrix G;  ///< T x n

  [[nodiscard]] Matrix gain(const CLData& data) const { return -data.utilde() * G; }
  [[nodiscard]] Matrix closed_loop(const CLData& data) const { return data.xbar() * G; }
};

struct CLEvaluation {
  Matrix P;
  double cost = 0.0;
  Matrix Y;  ///< empty unless requested
};

/// ||X~ G - I||_F.
[[nodiscard]] double feasibility_residual(const CLData& data, const CLPolicy& pol);

/// X~ G = I to 1e-8 and X_bar G Hurwitz.
[[nodiscard]] bool is_member(const CLData& data, const CLPolicy& pol);

/// Minimum-norm G with [-K; I] = [U~; X~] G.
[[nodiscard]] CLPolicy particular_solution(const CLData& data, const Matrix& k);

[[nodiscard]] CLEvaluation policy_evaluation(const CLData& data, const Weights& w,
                                             const CLPolicy& pol, bool with_gramian = false);

/// Minimum-Frobenius-norm minimizer of the data-driven Hamiltonian at P.
[[nodiscard]] CLPolicy policy_improvement(const CLData& data, const Weights& w, const Matrix& p);

[[nodiscard]] PiHistory policy_iteration(const CLData& data, const Weights& w,
                                         const CLPolicy& initial, const PiConfig& cfg = {});

struct CareLs {
  Matrix residual;
  Matrix A;  ///< X_bar (I - (U~ Pi)^+ U~) X~^+
  Matrix B;  ///< X_bar (U~ Pi)^+
};

/// CARE whose coefficients come from substituting the improved policy into
/// the policy evaluation.
[[nodiscard]] CareLs care_residual_ls(const CLData& data, const Weights& w, const Matrix& p);

struct CLCareView {
  Matrix J;         ///< (n+m) x (n+m)
  Matrix residual;  ///< J11 - J12 R^-1 J21
  Matrix gain;      ///< R^-1 J21
};

/// Compresses F(P) = X~^T P X_bar + X_bar^T P X~ + U~^T R U~ + X~^T Q X~ to J.
class ClCareOperator {
 public:
  ClCareOperator(const CLData& data, const Weights& w);

  [[nodiscard]] CLCareView operator()(const Matrix& p) const;
  [[nodiscard]] Matrix residual(const Matrix& p) const;
  [[nodiscard]] Matrix gain(const Matrix& p) const;
  /// F(P) itself (T x T).
  [[nodiscard]] Matrix f_matrix(const Matrix& p) const;

 private:
  const CLData* data_;
  Weights w_;
  Eigen::LLT<Matrix> r_llt_;
  Matrix xs_, xbs_, us_;  // X~ S, X_bar S, U~ S with S = [X~; U~]^+
};

[[nodiscard]] CLCareView care_residual_F(const CLData& data, const Weights& w, const Matrix& p);

[[nodiscard]] FlowTrajectory riccati_flow_cl(const CLData& data, const Weights& w,
                                             const Matrix& p0, const FlowConfig& cfg);

[[nodiscard]] ViHistory value_iteration_cl(const CLData& data, const Weights& w, const Matrix& p0,
                                           const ViConfig& cfg);

[[nodiscard]] double lqr_cost(const CLData& data, const Weights& w, const CLPolicy& pol);

/// 2 (U~^T R U~ G + X_bar^T P_G) Y_G.
[[nodiscard]] Matrix gradient(const CLData& data, const Weights& w, const CLPolicy& pol);

/// dG/dt = -alpha Pi (grad f_G + lambda grad ||Pi~ G||_F), re-projected onto
/// X~ G = I after every step. States are G(t), gains -U~ G(t).
[[nodiscard]] FlowTrajectory projected_gradient_flow(const CLData& data, const Weights& w,
                                                     const CLPolicy& initial, double alpha,
                                                     const FlowConfig& cfg, double lambda = 0.0);

}  // namespace ddlqr
