#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddlqr/linalg.hpp"
#include "ddlqr/system.hpp"

namespace ddlqr {

/// Piecewise-constant Gaussian excitation.
struct ExcitationConfig {
  double hold_interval = 0.01;
  double amplitude_scale = 1.0;
  std::uint64_t seed = 0;
  int substeps_per_hold = 10;  ///< fine-grid points per hold
};

/// Integration windows [t_i, t_i + window_length].
struct SampleSchedule {
  std::vector<double> window_starts;
  double window_length = 0.1;

  /// T back-to-back windows starting at `start`.
  [[nodiscard]] static SampleSchedule consecutive(int count, double window_length,
                                                  double start = 0.0);
};

/// Exact ZOH trajectory on a uniform fine grid, propagated in extended
/// precision so that the integrated data carry only final rounding.
struct Trajectory {
  double dt = 0.0;       ///< fine-grid step
  int steps_per_hold = 0;
  Matrix x;              ///< n x (N+1) states at grid points
  Matrix u;              ///< m x N input on [t_k, t_{k+1})
  Matrix int_x;          ///< n x (N+1) running integral of x from 0
  Matrix int_u;          ///< m x (N+1) running integral of u from 0
  Matrix step_xx;        ///< n^2 x N integral of vec(x x^T) over each step
  Matrix step_xu;        ///< nm x N integral of vec(x u^T) over each step

  [[nodiscard]] Eigen::Index steps() const { return u.cols(); }
  [[nodiscard]] double time(Eigen::Index k) const { return double(k) * dt; }
  [[nodiscard]] double horizon() const { return double(steps()) * dt; }
};

/// Propagates the plant under the given hold inputs (m x holds).
[[nodiscard]] Trajectory simulate_zoh(const Matrix& a, const Matrix& b, const Vector& x0,
                                      const Matrix& hold_inputs, double hold_interval,
                                      int substeps_per_hold);

/// Draws i.i.d. Gaussian hold inputs from `excitation` and propagates them.
[[nodiscard]] Trajectory simulate_zoh(const LinearSystem& sys, const Vector& x0,
                                      const ExcitationConfig& excitation, double horizon);

/// Integrated data for the closed-loop parameterization plus cached factors.
class CLData {
 public:
  /// Validates rank [U~; X~] = n + m and builds the caches.
  CLData(Matrix xbar, Matrix utilde, Matrix xtilde);

  [[nodiscard]] Eigen::Index n() const { return xbar_.rows(); }
  [[nodiscard]] Eigen::Index m() const { return utilde_.rows(); }
  [[nodiscard]] Eigen::Index samples() const { return xbar_.cols(); }

  [[nodiscard]] const Matrix& xbar() const { return xbar_; }
  [[nodiscard]] const Matrix& utilde() const { return utilde_; }
  [[nodiscard]] const Matrix& xtilde() const { return xtilde_; }

  [[nodiscard]] const Matrix& xtilde_pinv() const { return xtilde_pinv_; }    ///< T x n
  [[nodiscard]] const Matrix& projector() const { return projector_; }        ///< I - X~^+ X~
  [[nodiscard]] const Matrix& kernel() const { return kernel_; }              ///< T x (T-n)
  [[nodiscard]] const Matrix& stacked_pinv() const { return stacked_pinv_; }  ///< [U~;X~]^+
  [[nodiscard]] const Matrix& upi_pinv() const { return upi_pinv_; }          ///< (U~ Pi)^+
  /// I - [U~;X~]^+ [U~;X~].
  [[nodiscard]] const Matrix& stacked_projector() const { return stacked_projector_; }

 private:
  Matrix xbar_, utilde_, xtilde_;
  Matrix xtilde_pinv_, projector_, kernel_, stacked_pinv_, upi_pinv_, stacked_projector_;
};

/// Quadratic-integral data for the IRL parameterization. Row i of each
/// Gamma holds vec of the window-i quantity.
class IRLData {
 public:
  /// Validates rank [Gxx Gux] = n(n+1)/2 + mn.
  IRLData(Matrix gamma_dx, Matrix gamma_xx, Matrix gamma_ux, Eigen::Index n, Eigen::Index m);

  [[nodiscard]] Eigen::Index n() const { return n_; }
  [[nodiscard]] Eigen::Index m() const { return m_; }
  [[nodiscard]] Eigen::Index samples() const { return gamma_dx_.rows(); }

  [[nodiscard]] const Matrix& gamma_dx() const { return gamma_dx_; }  ///< T x n^2
  [[nodiscard]] const Matrix& gamma_xx() const { return gamma_xx_; }  ///< T x n^2
  [[nodiscard]] const Matrix& gamma_ux() const { return gamma_ux_; }  ///< T x mn, rows vec(r_xu^T)
  [[nodiscard]] const Matrix& gamma_xu() const { return gamma_xu_; }  ///< T x mn, rows vec(r_xu)
  [[nodiscard]] const Matrix& duplication() const { return duplication_; }

  /// Window-i matrices r_dx (n x n), r_xx (n x n), r_xu (n x m).
  [[nodiscard]] Matrix r_dx(Eigen::Index i) const;
  [[nodiscard]] Matrix r_xx(Eigen::Index i) const;
  [[nodiscard]] Matrix r_xu(Eigen::Index i) const;

 private:
  Eigen::Index n_, m_;
  Matrix gamma_dx_, gamma_xx_, gamma_ux_, gamma_xu_, duplication_;
};

[[nodiscard]] CLData collect_cl_data(const Trajectory& traj, const SampleSchedule& schedule);
[[nodiscard]] IRLData collect_irl_data(const Trajectory& traj, const SampleSchedule& schedule);

struct Identified {
  Matrix A;
  Matrix B;
};

/// [B A] = X_bar [U~; X~]^+.
[[nodiscard]] Identified ls_identify(const CLData& data);

/// Regression of vec(r_dx) on vec(A), vec(B) through the symmetric
/// second-moment dynamics of every window.
[[nodiscard]] Identified structured_identify(const IRLData& data);

/// `t,x1..xn,u1..um` per fine-grid point (input is the one applied from t on).
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

}  // namespace ddlqr
