#pragma once

// IRL parameterization: every quantity is a regression on the quadratic
// integrals (Gamma^dx, Gamma^xx, Gamma^ux) collected over the windows.

#include <algorithm>

#include "ddlqr/iterate.hpp"
#include "ddlqr/sim.hpp"
#include "ddlqr/system.hpp"

namespace ddlqr {

struct IRLRegression {
  Matrix PhiBar;  ///< T x (n^2 + mn), [Gamma^dx, -2 E(K)]
  Matrix Phi;     ///< T x (n(n+1)/2 + mn), [Gamma^dx D, -2 E(K)]
  Vector b;       ///< -Gamma^xx vec(Q + K^T R K)
  Matrix K;
};

struct IRLEvaluation {
  Matrix P;
  Matrix BtP;
  Vector theta;            ///< [vech P; vec(B^T P)]
  double residual = 0.0;   ///< ||b - Phi theta||_2
  double b_norm = 0.0;
  /// Residual above 1e-6 ||b||: K is probably not stabilizing or the data is bad.
  [[nodiscard]] bool suspect() const { return residual > 1e-6 * std::max(b_norm, 1e-300); }
};

struct Lse2Solution {
  Matrix H;      ///< estimate of A^T P + P A
  Matrix Kplus;  ///< estimate of R^-1 B^T P
};

/// E(K) = Gamma^ux + Gamma^xx (I kron K^T).
[[nodiscard]] Matrix e_matrix(const IRLData& data, const Matrix& k);

[[nodiscard]] IRLRegression build_regression(const IRLData& data, const Weights& w,
                                             const Matrix& k);

[[nodiscard]] IRLEvaluation policy_evaluation_irl(const IRLData& data, const Weights& w,
                                                  const Matrix& k);

/// P_hat positive definite. With Q > 0 this holds exactly when K stabilizes.
[[nodiscard]] bool certifies_stabilizing(const IRLEvaluation& ev);

[[nodiscard]] PiHistory policy_iteration_irl(const IRLData& data, const Weights& w,
                                             const Matrix& k0, const PiConfig& cfg = {});

/// The (H, K+) regression. Its matrix does not depend on P, so it is
/// factored once and reused by the Riccati flow and value iteration.
class Lse2 {
 public:
  Lse2(const IRLData& data, const Matrix& r);

  [[nodiscard]] Lse2Solution solve(const Matrix& p) const;

 private:
  const IRLData* data_;
  Matrix dup_;
  Vector scale_;
  Eigen::ColPivHouseholderQR<Matrix> qr_;
};

[[nodiscard]] Lse2Solution solve_lse2(const IRLData& data, const Matrix& r, const Matrix& p);

/// H - K+^T R K+ + Q.
[[nodiscard]] Matrix care_residual_irl(const IRLData& data, const Weights& w, const Matrix& p);

[[nodiscard]] FlowTrajectory riccati_flow_irl(const IRLData& data, const Weights& w,
                                              const Matrix& p0, const FlowConfig& cfg);

[[nodiscard]] ViHistory value_iteration_irl(const IRLData& data, const Weights& w,
                                            const Matrix& p0, const ViConfig& cfg);

/// vec(L) = (Psi PhiBar^+ Gamma^xx)^T vec(I); equals -Y_K on exact data.
[[nodiscard]] Matrix l_matrix(const IRLData& data, const Weights& w, const Matrix& k);

/// 2 (B^T P - R K) L.
[[nodiscard]] Matrix gradient_irl(const IRLData& data, const Weights& w, const Matrix& k);

/// dK/dt = -beta grad; throws once P_hat stops being positive definite.
[[nodiscard]] FlowTrajectory gradient_flow_irl(const IRLData& data, const Weights& w,
                                               const Matrix& k0, double beta,
                                               const FlowConfig& cfg);

/// tr(P Gdx_i) + tr(Q Gxx_i) - tr(W R^-1 W^T Gxx_i) - 2 tr(W^T Gxu_i).
[[nodiscard]] double f_i(const IRLData& data, Eigen::Index i, const Weights& w, const Matrix& p,
                         const Matrix& wmat);

}  // namespace ddlqr
