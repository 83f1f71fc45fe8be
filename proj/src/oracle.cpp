#include "ddlqr/oracle.hpp"

#include <random>

namespace ddlqr {

namespace {

Matrix gain_from_value(const LinearSystem& sys, const Matrix& p) {
  return sys.R.llt().solve(sys.B.transpose() * p);
}

double care_scale(const LinearSystem& sys, const Matrix& p) {
  const Matrix s = sys.B * sys.R.llt().solve(sys.B.transpose());
  return std::max(1.0, sys.Q.norm() + 2.0 * p.norm() * sys.A.norm() + p.norm() * p.norm() * s.norm());
}

Matrix random_gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix k(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) k(i, j) = normal(rng);
  }
  return k;
}

}  // namespace

Matrix care_residual(const LinearSystem& sys, const Matrix& p) {
  const Matrix pb = p * sys.B;
  return symmetrize(Matrix(sys.A.transpose() * p + p * sys.A -
                           pb * sys.R.llt().solve(pb.transpose()) + sys.Q));
}

CareSolution care_solve(const LinearSystem& sys) {
  validate_weights(sys);
  const Eigen::Index n = sys.n();
  const Matrix s = sys.B * sys.R.llt().solve(sys.B.transpose());
  Matrix ham(2 * n, 2 * n);
  ham << sys.A, -s, -sys.Q, -sys.A.transpose();

  Eigen::ComplexEigenSolver<Matrix> es(ham);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::Numerical, "care_solve: Hamiltonian eigen-decomposition failed");
  }
  const double hscale = std::max(1.0, ham.norm());
  Eigen::MatrixXcd basis(2 * n, n);
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    const auto lambda = es.eigenvalues()(i);
    if (std::abs(lambda.real()) <= 1e-10 * hscale) {
      throw Error(ErrorCode::Numerical, "CARE ill-posed (Hamiltonian eigenvalue on imaginary axis)");
    }
    if (lambda.real() < 0) {
      if (count == n) break;
      basis.col(count++) = es.eigenvectors().col(i);
    }
  }
  if (count != n) {
    throw Error(ErrorCode::Numerical, "CARE ill-posed (no n-dimensional stable subspace)");
  }
  const Eigen::MatrixXcd x1 = basis.topRows(n);
  const Eigen::MatrixXcd x2 = basis.bottomRows(n);
  Matrix p = symmetrize(Matrix((x2 * x1.inverse()).real()));

  // Kleinman refinement washes out eigenvector conditioning.
  CareSolution sol;
  for (int it = 0; it < 8; ++it) {
    const Matrix k = gain_from_value(sys, p);
    const Matrix acl = sys.A - sys.B * k;
    if (!is_hurwitz(acl)) break;
    const Matrix next = solve_lyapunov(acl, Matrix(sys.Q + k.transpose() * sys.R * k));
    const double before = care_residual(sys, p).norm();
    const double after = care_residual(sys, next).norm();
    if (it >= 2 && after >= before) break;
    p = next;
    if (it >= 1 && after <= 1e-13 * care_scale(sys, p)) break;
  }
  sol.Pstar = p;
  sol.Kstar = gain_from_value(sys, p);
  sol.residual = care_residual(sys, p).norm();
  if (!is_hurwitz(Matrix(sys.A - sys.B * sol.Kstar))) {
    throw Error(ErrorCode::Numerical, "care_solve: recovered gain is not stabilizing");
  }
  return sol;
}

Matrix model_value(const LinearSystem& sys, const Matrix& k) {
  const Matrix acl = sys.A - sys.B * k;
  return solve_lyapunov(acl, Matrix(sys.Q + k.transpose() * sys.R * k));
}

Matrix model_gramian(const LinearSystem& sys, const Matrix& k) {
  const Matrix acl = sys.A - sys.B * k;
  return solve_lyapunov_dual(acl, Matrix::Identity(sys.n(), sys.n()));
}

double model_cost(const LinearSystem& sys, const Matrix& k) { return model_value(sys, k).trace(); }

Matrix model_gradient(const LinearSystem& sys, const Matrix& k) {
  const Matrix p = model_value(sys, k);
  const Matrix y = model_gramian(sys, k);
  return 2.0 * (sys.R * k - sys.B.transpose() * p) * y;
}

PiHistory kleinman_pi(const LinearSystem& sys, const Matrix& k0, const PiConfig& cfg) {
  if (!is_hurwitz(Matrix(sys.A - sys.B * k0))) {
    throw Error(ErrorCode::NotStabilizing, "kleinman_pi: initial gain is not stabilizing");
  }
  PiHistory out;
  Stopwatch clock;
  Matrix k = k0;
  out.gains.push_back(k);
  out.wall_ns.push_back(0);
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const Matrix p = model_value(sys, k);
    const Matrix next = gain_from_value(sys, p);
    out.values.push_back(p);
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

FlowTrajectory riccati_flow_model(const LinearSystem& sys, const Matrix& p0,
                                  const FlowConfig& cfg) {
  return integrate_flow(
      p0, cfg, [&](const Matrix& p) { return care_residual(sys, p); },
      [&](const Matrix& p) { return gain_from_value(sys, p); });
}

ViHistory vi_model(const LinearSystem& sys, const Matrix& p0, const ViConfig& cfg) {
  return value_iterate(
      p0, cfg, [&](const Matrix& p) { return care_residual(sys, p); },
      [&](const Matrix& p) { return gain_from_value(sys, p); });
}

FlowTrajectory gradient_flow_model(const LinearSystem& sys, const Matrix& k0, double beta,
                                   const FlowConfig& cfg) {
  return integrate_flow(
      k0, cfg, [&](const Matrix& k) { return Matrix(-beta * model_gradient(sys, k)); },
      [](const Matrix& k) { return k; });
}

Matrix stabilizing_gain_search(const LinearSystem& sys, std::uint64_t seed) {
  constexpr double margin = 1e-6;
  constexpr int max_draws = 10000;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < max_draws; ++i) {
    Matrix k = random_gaussian(rng, sys.m(), sys.n());
    if (spectral(Matrix(sys.A - sys.B * k)).abscissa < -margin) return k;
  }
  // Oracle-assisted fallback.
  const Matrix kstar = care_solve(sys).Kstar;
  for (int i = 0; i < 100; ++i) {
    Matrix k = kstar + 0.5 * random_gaussian(rng, sys.m(), sys.n());
    if (spectral(Matrix(sys.A - sys.B * k)).abscissa < -margin) return k;
  }
  throw Error(ErrorCode::NotStabilizing, "stabilizing_gain_search: no stabilizing gain found");
}

}  // namespace ddlqr
