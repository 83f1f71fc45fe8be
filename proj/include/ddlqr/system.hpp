#pragma once

#include "ddlqr/linalg.hpp"

namespace ddlqr {

/// LQR weights: Q positive semidefinite, R positive definite.
struct Weights {
  Matrix Q;
  Matrix R;
};

/// Plant dx/dt = A x + B u with LQR weights Q (PSD) and R (PD).
struct LinearSystem {
  Matrix A;
  Matrix B;
  Matrix Q;
  Matrix R;

  [[nodiscard]] Eigen::Index n() const { return A.rows(); }
  [[nodiscard]] Eigen::Index m() const { return B.cols(); }
  [[nodiscard]] Weights weights() const { return {Q, R}; }
};

/// Throws on shape errors, asymmetric weights, R not PD or Q not PSD.
void validate_weights(const LinearSystem& sys);

/// PBH test: rank [A - lambda I, B] = n at every eigenvalue with Re >= 0.
[[nodiscard]] bool is_stabilizable(const Matrix& a, const Matrix& b);

/// PBH test on (A, sqrt(Q)) at eigenvalues with Re >= 0.
[[nodiscard]] bool is_detectable(const Matrix& a, const Matrix& q);

/// Stabilizable (A,B) and detectable (A, sqrt Q).
[[nodiscard]] bool satisfies_standing_assumption(const LinearSystem& sys);

/// Symmetric PSD square root via eigen-decomposition.
[[nodiscard]] Matrix sym_sqrt(const Matrix& s);

}  // namespace ddlqr
