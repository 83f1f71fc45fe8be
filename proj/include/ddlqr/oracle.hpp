#pragma once

// Model-based ground truth. Data-driven solvers never call into this header;
// the benchmark uses it for initial gains and for residuals.

#include <cstdint>

#include "ddlqr/iterate.hpp"
#include "ddlqr/system.hpp"

namespace ddlqr {

struct CareSolution {
  Matrix Pstar;
  Matrix Kstar;
  double residual = 0.0;  ///< Frobenius norm of the CARE residual at Pstar
};

/// A^T P + P A - P B R^-1 B^T P + Q.
[[nodiscard]] Matrix care_residual(const LinearSystem& sys, const Matrix& p);

/// Stable invariant subspace of the Hamiltonian followed by Kleinman refinement.
[[nodiscard]] CareSolution care_solve(const LinearSystem& sys);

/// P_K with (A-BK)^T P + P (A-BK) + Q + K^T R K = 0.
[[nodiscard]] Matrix model_value(const LinearSystem& sys, const Matrix& k);

/// Y_K with (A-BK) Y + Y (A-BK)^T + I = 0.
[[nodiscard]] Matrix model_gramian(const LinearSystem& sys, const Matrix& k);

[[nodiscard]] double model_cost(const LinearSystem& sys, const Matrix& k);

/// 2 (R K - B^T P_K) Y_K.
[[nodiscard]] Matrix model_gradient(const LinearSystem& sys, const Matrix& k);

[[nodiscard]] PiHistory kleinman_pi(const LinearSystem& sys, const Matrix& k0,
                                    const PiConfig& cfg = {});

[[nodiscard]] FlowTrajectory riccati_flow_model(const LinearSystem& sys, const Matrix& p0,
                                                const FlowConfig& cfg);

[[nodiscard]] ViHistory vi_model(const LinearSystem& sys, const Matrix& p0, const ViConfig& cfg);

/// dK/dt = -beta grad f_K; throws if the trajectory leaves the stabilizing set.
[[nodiscard]] FlowTrajectory gradient_flow_model(const LinearSystem& sys, const Matrix& k0,
                                                 double beta, const FlowConfig& cfg);

/// Rejection-samples standard Gaussian gains until A - BK is Hurwitz with
/// margin 1e-6; after 10000 draws falls back to K* + 0.5 * noise.
[[nodiscard]] Matrix stabilizing_gain_search(const LinearSystem& sys, std::uint64_t seed);

}  // namespace ddlqr
