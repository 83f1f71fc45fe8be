#pragma once

// The semidefinite programs for the LQR problem: the model-based pair and
// five data-driven formulations. Each build_* returns the conic problem
// together with the expressions of its matrix variables; each solve_* runs
// it and recovers the gain.

#include "ddlqr/conic.hpp"
#include "ddlqr/sim.hpp"
#include "ddlqr/system.hpp"

namespace ddlqr {

// ---- model-based pair, with x0 x0^T replaced by I

/// max tr(P) s.t. [A^T P + P A + Q, P B; B^T P, R] >= 0, P >= 0.
struct RiccatiProgram {
  ConicProblem problem;
  Affine P;
};
[[nodiscard]] RiccatiProgram build_riccati_lmi(const LinearSystem& sys);

/// min tr(Q Y) + tr(S) s.t. [S, R^1/2 Z; Z^T R^1/2, Y] >= 0,
/// A Y + Y A^T - B Z - Z^T B^T + I <= 0, Y > 0, with Z = K Y.
struct GramianProgram {
  ConicProblem problem;
  Affine Y, Z, S;
};
[[nodiscard]] GramianProgram build_gramian_lmi(const LinearSystem& sys,
                                               const SolverSettings& settings = {});

struct DualityReport {
  double riccati_value = 0.0;  ///< tr(P) at the optimum
  double gramian_value = 0.0;
  Matrix P;
  Matrix K_riccati;  ///< R^-1 B^T P
  Matrix K_gramian;  ///< Z Y^-1
};
[[nodiscard]] DualityReport solve_model_pair(const LinearSystem& sys,
                                             const SolverSettings& settings = {},
                                             const ConicBackend& backend = {});

// ---- closed-loop parameterization

struct Cl1Program {
  ConicProblem problem;
  Affine Y, Z, S;
};
struct Cl1Result {
  Matrix K, G, Y, Z, S;
  ConicSolution solution;
};
[[nodiscard]] Cl1Program build_cl1(const CLData& data, const Weights& w,
                                   const SolverSettings& settings = {});
[[nodiscard]] Cl1Result solve_cl1(const CLData& data, const Weights& w,
                                  const SolverSettings& settings = {},
                                  const ConicBackend& backend = {});

struct Cl2Program {
  ConicProblem problem;
  Affine Z, S;
};
struct Cl2Result {
  Matrix K, P, Z, S;
  ConicSolution solution;
};
[[nodiscard]] Cl2Program build_cl2(const CLData& data, const Weights& w,
                                   const SolverSettings& settings = {});
[[nodiscard]] Cl2Result solve_cl2(const CLData& data, const Weights& w,
                                  const SolverSettings& settings = {},
                                  const ConicBackend& backend = {});

struct Cl3Program {
  ConicProblem problem;
  Affine P;
};
struct Cl3Result {
  Matrix P, K;
  ConicSolution solution;
};
[[nodiscard]] Cl3Program build_cl3(const CLData& data, const Weights& w);
[[nodiscard]] Cl3Result solve_cl3(const CLData& data, const Weights& w,
                                  const SolverSettings& settings = {},
                                  const ConicBackend& backend = {});

// ---- IRL parameterization

struct Irl1Program {
  ConicProblem problem;
  Affine P, W, Z;
};
struct Irl1Result {
  Matrix K, P, W, Z;
  ConicSolution solution;
  /// ||Z - W R^-1 W^T||_F; zero when the relaxation is exact.
  double slack = 0.0;
};
[[nodiscard]] Irl1Program build_irl1(const IRLData& data, const Weights& w);
[[nodiscard]] Irl1Result solve_irl1(const IRLData& data, const Weights& w,
                                    const SolverSettings& settings = {},
                                    const ConicBackend& backend = {});

struct Irl2Program {
  ConicProblem problem;
  Affine P, H, Kplus;
};
struct Irl2Result {
  Matrix K, P, H;
  ConicSolution solution;
};
[[nodiscard]] Irl2Program build_irl2(const IRLData& data, const Weights& w,
                                     const SolverSettings& settings = {});
[[nodiscard]] Irl2Result solve_irl2(const IRLData& data, const Weights& w,
                                    const SolverSettings& settings = {},
                                    const ConicBackend& backend = {});

}  // namespace ddlqr
