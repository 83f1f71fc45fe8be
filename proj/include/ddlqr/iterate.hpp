#pragma once

// Stop rules, step schedules and trajectory containers shared by the
// model-based and data-driven iterative schemes.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ddlqr/linalg.hpp"

namespace ddlqr {

struct PiConfig {
  double tolerance = 1e-10;  ///< stop once ||K_{k+1} - K_k||_F <= tolerance
  int max_iterations = 50;
};

/// One entry per evaluated policy: gain K_k and its value matrix P_k.
struct PiHistory {
  std::vector<Matrix> gains;
  std::vector<Matrix> values;
  std::vector<Matrix> policies;  ///< G_k (closed-loop parameterization only)
  std::vector<std::int64_t> wall_ns;
  bool converged = false;
};

/// Step sizes eps_k = c / (k+1)^p and reset balls {P >= 0 : ||P||_F <= slope (q+1)}.
struct ViConfig {
  double c = 40.0;
  double p = 0.8;
  double radius_slope = 5.0;
  int max_iterations = 5000;
  double tolerance = 1e-12;  ///< stop once ||P_{k+1} - P_k||_F <= tolerance

  [[nodiscard]] double step(int k) const { return c / std::pow(double(k + 1), p); }
  [[nodiscard]] double radius(int q) const { return radius_slope * double(q + 1); }
};

struct ViHistory {
  std::vector<Matrix> values;  ///< P_0, P_1, ...
  std::vector<Matrix> gains;   ///< gain recovered at each P_k
  std::vector<std::int64_t> wall_ns;
  int resets = 0;
  bool converged = false;
};

/// Integration over [0, horizon], recorded every `checkpoint` seconds.
/// Adaptive mode runs Dormand-Prince 5(4) with error control, starting from
/// `step`; a stage that leaves the domain (the right-hand side throws
/// NotStabilizing) rejects the step and shrinks it. Fixed mode is plain RK4
/// at `step`, and a domain exit is an error.
struct FlowConfig {
  double horizon = 10.0;
  double step = 1e-3;
  double checkpoint = 0.01;
  bool adaptive = true;
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;

  [[nodiscard]] long steps() const { return std::lround(horizon / step); }
  [[nodiscard]] long stride() const { return std::max(1L, std::lround(checkpoint / step)); }
  [[nodiscard]] long checkpoints() const {
    return std::max(1L, std::lround(horizon / checkpoint));
  }
};

struct FlowTrajectory {
  std::vector<double> times;
  std::vector<Matrix> states;  ///< P(t), K(t) or G(t) depending on the flow
  std::vector<Matrix> gains;   ///< gain recovered at each checkpoint
  std::vector<std::int64_t> wall_ns;
};

/// Membership test for the VI reset balls.
[[nodiscard]] inline bool in_reset_ball(const Matrix& p, double radius) {
  return p.allFinite() && p.norm() <= radius && min_eigenvalue_sym(p) >= -1e-12 * std::max(1.0, p.norm());
}

template <typename F>
[[nodiscard]] Matrix rk4_step(F&& f, const Matrix& y, double h) {
  const Matrix k1 = f(y);
  const Matrix k2 = f(Matrix(y + 0.5 * h * k1));
  const Matrix k3 = f(Matrix(y + 0.5 * h * k2));
  const Matrix k4 = f(Matrix(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  [[nodiscard]] std::int64_t elapsed_ns() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() -
                                                                start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

struct NoProjection {
  void operator()(Matrix&) const {}
};

namespace detail {

// Dormand-Prince 5(4) step; returns the 5th-order solution and the error estimate.
template <typename Rhs>
std::pair<Matrix, Matrix> dopri_step(Rhs& f, const Matrix& y, double h) {
  const Matrix k1 = f(y);
  const Matrix k2 = f(Matrix(y + h * (1.0 / 5) * k1));
  const Matrix k3 = f(Matrix(y + h * ((3.0 / 40) * k1 + (9.0 / 40) * k2)));
  const Matrix k4 = f(Matrix(y + h * ((44.0 / 45) * k1 - (56.0 / 15) * k2 + (32.0 / 9) * k3)));
  const Matrix k5 = f(Matrix(y + h * ((19372.0 / 6561) * k1 - (25360.0 / 2187) * k2 +
                                      (64448.0 / 6561) * k3 - (212.0 / 729) * k4)));
  const Matrix k6 = f(Matrix(y + h * ((9017.0 / 3168) * k1 - (355.0 / 33) * k2 +
                                      (46732.0 / 5247) * k3 + (49.0 / 176) * k4 -
                                      (5103.0 / 18656) * k5)));
  Matrix y5 = y + h * ((35.0 / 384) * k1 + (500.0 / 1113) * k3 + (125.0 / 192) * k4 -
                       (2187.0 / 6784) * k5 + (11.0 / 84) * k6);
  const Matrix k7 = f(y5);
  Matrix err = h * ((71.0 / 57600) * k1 - (71.0 / 16695) * k3 + (71.0 / 1920) * k4 -
                    (17253.0 / 339200) * k5 + (22.0 / 525) * k6 - (1.0 / 40) * k7);
  return {std::move(y5), std::move(err)};
}

}  // namespace detail

/// Integrates dY/dt = rhs(Y) and records checkpoints. `gain_of` maps a state
/// to the gain stored alongside it; `project` is applied after every
/// accepted step and may throw NotStabilizing to reject it.
template <typename Rhs, typename GainOf, typename Project = NoProjection>
[[nodiscard]] FlowTrajectory integrate_flow(const Matrix& initial, const FlowConfig& cfg, Rhs&& rhs,
                                            GainOf&& gain_of, Project&& project = {},
                                            double blow_up = 1e9) {
  if (cfg.horizon <= 0 || cfg.step <= 0 || cfg.checkpoint <= 0) {
    throw Error(ErrorCode::InvalidArgument, "flow: horizon, step and checkpoint must be positive");
  }
  FlowTrajectory out;
  Stopwatch clock;
  Matrix y = initial;
  auto record = [&](double t) {
    out.times.push_back(t);
    out.states.push_back(y);
    out.gains.push_back(gain_of(y));
    out.wall_ns.push_back(clock.elapsed_ns());
  };
  auto check_finite = [&](const Matrix& v) {
    if (!v.allFinite() || v.norm() > blow_up) {
      throw Error(ErrorCode::Numerical, "flow diverged (state norm exceeded bound)");
    }
  };
  record(0.0);

  if (!cfg.adaptive) {
    const long steps = cfg.steps();
    const long stride = cfg.stride();
    for (long s = 1; s <= steps; ++s) {
      try {
        y = rk4_step(rhs, y, cfg.step);
        project(y);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NotStabilizing) throw;
        throw Error(ErrorCode::NotStabilizing,
                    "flow left the stabilizing set; use a smaller step (" + std::string(e.what()) + ")");
      }
      check_finite(y);
      if (s % stride == 0 || s == steps) record(double(s) * cfg.step);
    }
    return out;
  }

  const long marks = cfg.checkpoints();
  const double spacing = cfg.horizon / double(marks);
  double t = 0.0;
  double h = cfg.step;
  for (long j = 1; j <= marks; ++j) {
    const double target = j == marks ? cfg.horizon : double(j) * spacing;
    while (t < target) {
      const bool last = h >= target - t;
      const double hh = last ? target - t : h;
      if (hh <= 1e-14 * std::max(1.0, t)) {
        throw Error(ErrorCode::NotStabilizing, "flow step size underflow (trajectory at the domain boundary)");
      }
      Matrix next;
      double err_norm = 0.0;
      bool ok = true;
      try {
        auto [y5, err] = detail::dopri_step(rhs, y, hh);
        const double scale = cfg.abs_tol + cfg.rel_tol * std::max(y.norm(), y5.norm());
        err_norm = err.norm() / scale;
        next = std::move(y5);
        if (err_norm <= 1.0) project(next);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NotStabilizing) throw;
        ok = false;
      }
      if (!ok || !next.allFinite()) {
        h = hh / 4.0;
        continue;
      }
      const double factor = err_norm > 0 ? 0.9 * std::pow(err_norm, -0.2) : 5.0;
      if (err_norm <= 1.0) {
        check_finite(next);
        y = std::move(next);
        t = last ? target : t + hh;
        // A step clipped to the checkpoint says little about the next one.
        const double proposed = hh * std::clamp(factor, 0.2, 5.0);
        h = last ? std::max(h, proposed) : proposed;
      } else {
        h = hh * std::clamp(factor, 0.1, 0.9);
      }
      h = std::min(h, cfg.horizon);
    }
    record(t);
  }
  return out;
}

/// Value iteration P+ = P + eps_k * residual(P) with resets to P_0 outside B_q.
template <typename Residual, typename GainOf>
[[nodiscard]] ViHistory value_iterate(const Matrix& p0, const ViConfig& cfg, Residual&& residual,
                                      GainOf&& gain_of) {
  ViHistory out;
  Stopwatch clock;
  Matrix p = p0;
  int q = 0;
  out.values.push_back(p);
  out.gains.push_back(gain_of(p));
  out.wall_ns.push_back(0);
  for (int k = 0; k < cfg.max_iterations; ++k) {
    Matrix next = symmetrize(Matrix(p + cfg.step(k) * residual(p)));
    bool reset = false;
    if (!in_reset_ball(next, cfg.radius(q))) {
      next = p0;
      ++q;
      ++out.resets;
      reset = true;
    }
    const double change = (next - p).norm();
    p = std::move(next);
    out.values.push_back(p);
    out.gains.push_back(gain_of(p));
    out.wall_ns.push_back(clock.elapsed_ns());
    if (!reset && change <= cfg.tolerance) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace ddlqr
