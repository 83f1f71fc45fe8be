#include "ddlqr/sim.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace ddlqr {

namespace {

constexpr double kBlowUp = 1e9;

Eigen::Index grid_index(double t, double dt) {
  const double k = t / dt;
  const auto idx = static_cast<Eigen::Index>(std::llround(k));
  if (std::abs(k - double(idx)) > 1e-6) {
    throw Error(ErrorCode::InvalidArgument, "sample window does not align with the fine grid");
  }
  return idx;
}

struct WindowIndex {
  Eigen::Index begin;
  Eigen::Index end;
};

std::vector<WindowIndex> window_indices(const Trajectory& traj, const SampleSchedule& schedule) {
  if (schedule.window_starts.empty() || schedule.window_length <= 0) {
    throw Error(ErrorCode::InvalidArgument, "sample schedule needs T >= 1 and delta > 0");
  }
  std::vector<WindowIndex> out;
  out.reserve(schedule.window_starts.size());
  for (double start : schedule.window_starts) {
    const auto k0 = grid_index(start, traj.dt);
    const auto k1 = grid_index(start + schedule.window_length, traj.dt);
    if (k0 < 0 || k1 > traj.steps() || k1 <= k0) {
      throw Error(ErrorCode::InvalidArgument, "sample window lies outside the simulated horizon");
    }
    out.push_back({k0, k1});
  }
  return out;
}

}  // namespace

SampleSchedule SampleSchedule::consecutive(int count, double window_length, double start) {
  SampleSchedule s;
  s.window_length = window_length;
  for (int i = 0; i < count; ++i) s.window_starts.push_back(start + i * window_length);
  return s;
}

Trajectory simulate_zoh(const Matrix& a, const Matrix& b, const Vector& x0,
                        const Matrix& hold_inputs, double hold_interval, int substeps_per_hold) {
  using LMatrix = MatrixX<long double>;
  using LVector = VectorX<long double>;
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.cols();
  if (a.cols() != n || b.rows() != n || x0.size() != n || hold_inputs.rows() != m) {
    throw Error(ErrorCode::InvalidArgument, "simulate_zoh: dimension mismatch");
  }
  if (hold_interval <= 0 || substeps_per_hold < 1) {
    throw Error(ErrorCode::InvalidArgument, "simulate_zoh: need hold > 0 and at least one substep");
  }

  Trajectory traj;
  traj.dt = hold_interval / substeps_per_hold;
  traj.steps_per_hold = substeps_per_hold;
  const long double dt = traj.dt;

  // y = [x; u] with u frozen over a step obeys y' = F y.
  const Eigen::Index ny = n + m;
  LMatrix f = LMatrix::Zero(ny, ny);
  f.topLeftCorner(n, n) = a.cast<long double>();
  f.topRightCorner(n, m) = b.cast<long double>();

  // Augmented [y; int x; int u] for the state and its first moments.
  const Eigen::Index dim = ny + n + m;
  LMatrix aug = LMatrix::Zero(dim, dim);
  aug.topLeftCorner(ny, ny) = f;
  aug.block(ny, 0, n, n).setIdentity();
  aug.block(ny + n, n, m, m).setIdentity();
  const LMatrix step = expm(LMatrix(aug * dt));

  // Van Loan: the top-right block of exp([F (+) F, I; 0, 0] dt) maps
  // vec(y y^T) at the start of a step to the step's integral of vec(y y^T).
  const Eigen::Index nn = ny * ny;
  const LMatrix eye_y = LMatrix::Identity(ny, ny);
  LMatrix vl = LMatrix::Zero(2 * nn, 2 * nn);
  vl.topLeftCorner(nn, nn) = kron(eye_y, f) + kron(f, eye_y);
  vl.topRightCorner(nn, nn).setIdentity();
  const LMatrix second = expm(LMatrix(vl * dt)).topRightCorner(nn, nn);

  const Eigen::Index holds = hold_inputs.cols();
  const Eigen::Index total = holds * substeps_per_hold;
  traj.x.resize(n, total + 1);
  traj.u.resize(m, total);
  traj.int_x.resize(n, total + 1);
  traj.int_u.resize(m, total + 1);
  traj.step_xx.resize(n * n, total);
  traj.step_xu.resize(n * m, total);

  LVector z = LVector::Zero(dim);
  z.head(n) = x0.cast<long double>();
  traj.x.col(0) = x0;
  traj.int_x.col(0).setZero();
  traj.int_u.col(0).setZero();
  Eigen::Index k = 0;
  for (Eigen::Index h = 0; h < holds; ++h) {
    z.segment(n, m) = hold_inputs.col(h).cast<long double>();
    for (int s = 0; s < substeps_per_hold; ++s, ++k) {
      const LVector y = z.head(ny);
      const LMatrix w = unvec(LVector(second * vec(LMatrix(y * y.transpose()))), ny, ny);
      traj.step_xx.col(k) = vec(LMatrix(w.topLeftCorner(n, n))).cast<double>();
      traj.step_xu.col(k) = vec(LMatrix(w.topRightCorner(n, m))).cast<double>();
      z = step * z;
      traj.u.col(k) = hold_inputs.col(h);
      traj.x.col(k + 1) = z.head(n).cast<double>();
      traj.int_x.col(k + 1) = z.segment(ny, n).cast<double>();
      traj.int_u.col(k + 1) = z.segment(ny + n, m).cast<double>();
      if (!traj.x.col(k + 1).allFinite() || traj.x.col(k + 1).norm() > kBlowUp) {
        throw Error(ErrorCode::Numerical, "simulate_zoh: trajectory blow-up");
      }
    }
  }
  return traj;
}

Trajectory simulate_zoh(const LinearSystem& sys, const Vector& x0,
                        const ExcitationConfig& excitation, double horizon) {
  if (excitation.hold_interval <= 0) {
    throw Error(ErrorCode::InvalidArgument, "simulate_zoh: hold interval must be positive");
  }
  const double ratio = horizon / excitation.hold_interval;
  const auto holds = static_cast<Eigen::Index>(std::ceil(ratio - 1e-9));
  std::mt19937_64 rng(excitation.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix inputs(sys.m(), holds);
  for (Eigen::Index h = 0; h < holds; ++h) {
    for (Eigen::Index j = 0; j < sys.m(); ++j) inputs(j, h) = excitation.amplitude_scale * normal(rng);
  }
  return simulate_zoh(sys.A, sys.B, x0, inputs, excitation.hold_interval,
                      excitation.substeps_per_hold);
}

// ---------------------------------------------------------------------------

CLData::CLData(Matrix xbar, Matrix utilde, Matrix xtilde)
    : xbar_(std::move(xbar)), utilde_(std::move(utilde)), xtilde_(std::move(xtilde)) {
  const Eigen::Index n = xbar_.rows();
  const Eigen::Index m = utilde_.rows();
  const Eigen::Index t = xbar_.cols();
  if (xtilde_.rows() != n || xtilde_.cols() != t || utilde_.cols() != t) {
    throw Error(ErrorCode::InvalidArgument, "CLData: inconsistent data shapes");
  }
  Matrix stacked(n + m, t);
  stacked << utilde_, xtilde_;
  if (numerical_rank(stacked) != n + m) {
    throw Error(ErrorCode::DataNotInformative, "data not informative (CL)");
  }
  xtilde_pinv_ = pinv(xtilde_);
  projector_ = symmetrize(Matrix(Matrix::Identity(t, t) - xtilde_pinv_ * xtilde_));
  kernel_ = null_basis(xtilde_);
  stacked_pinv_ = pinv(stacked);
  upi_pinv_ = pinv(Matrix(utilde_ * projector_));
  stacked_projector_ = symmetrize(Matrix(Matrix::Identity(t, t) - stacked_pinv_ * stacked));
}

IRLData::IRLData(Matrix gamma_dx, Matrix gamma_xx, Matrix gamma_ux, Eigen::Index n,
                 Eigen::Index m)
    : n_(n),
      m_(m),
      gamma_dx_(std::move(gamma_dx)),
      gamma_xx_(std::move(gamma_xx)),
      gamma_ux_(std::move(gamma_ux)) {
  const Eigen::Index t = gamma_dx_.rows();
  if (gamma_dx_.cols() != n * n || gamma_xx_.rows() != t || gamma_xx_.cols() != n * n ||
      gamma_ux_.rows() != t || gamma_ux_.cols() != m * n) {
    throw Error(ErrorCode::InvalidArgument, "IRLData: inconsistent data shapes");
  }
  Matrix stacked(t, n * n + m * n);
  stacked << gamma_xx_, gamma_ux_;
  if (numerical_rank(stacked) != vech_size(n) + m * n) {
    throw Error(ErrorCode::DataNotInformative, "data not informative (IRL)");
  }
  // vec(r_xu) = C vec(r_xu^T) with C the commutation matrix of an m x n matrix.
  gamma_xu_ = gamma_ux_ * commutation_matrix(n, m);
  duplication_ = duplication_matrix(n);
}

Matrix IRLData::r_dx(Eigen::Index i) const {
  return unvec(Vector(gamma_dx_.row(i).transpose()), n_, n_);
}

Matrix IRLData::r_xx(Eigen::Index i) const {
  return unvec(Vector(gamma_xx_.row(i).transpose()), n_, n_);
}

Matrix IRLData::r_xu(Eigen::Index i) const {
  return unvec(Vector(gamma_xu_.row(i).transpose()), n_, m_);
}

CLData collect_cl_data(const Trajectory& traj, const SampleSchedule& schedule) {
  const auto windows = window_indices(traj, schedule);
  const Eigen::Index t = static_cast<Eigen::Index>(windows.size());
  Matrix xbar(traj.x.rows(), t), utilde(traj.u.rows(), t), xtilde(traj.x.rows(), t);
  for (Eigen::Index i = 0; i < t; ++i) {
    const auto [k0, k1] = windows[static_cast<std::size_t>(i)];
    xbar.col(i) = traj.x.col(k1) - traj.x.col(k0);
    xtilde.col(i) = traj.int_x.col(k1) - traj.int_x.col(k0);
    utilde.col(i) = traj.int_u.col(k1) - traj.int_u.col(k0);
  }
  return CLData(std::move(xbar), std::move(utilde), std::move(xtilde));
}

IRLData collect_irl_data(const Trajectory& traj, const SampleSchedule& schedule) {
  const auto windows = window_indices(traj, schedule);
  const Eigen::Index n = traj.x.rows();
  const Eigen::Index m = traj.u.rows();
  const Eigen::Index t = static_cast<Eigen::Index>(windows.size());
  Matrix gdx(t, n * n), gxx(t, n * n), gux(t, m * n);
  for (Eigen::Index i = 0; i < t; ++i) {
    const auto [k0, k1] = windows[static_cast<std::size_t>(i)];
    const Vector x_end = traj.x.col(k1);
    const Vector x_begin = traj.x.col(k0);
    const Matrix rdx = x_end * x_end.transpose() - x_begin * x_begin.transpose();

    const auto steps = Eigen::seqN(k0, k1 - k0);
    const Vector sxx = traj.step_xx(Eigen::all, steps).cast<long double>().rowwise().sum().cast<double>();
    const Vector sxu = traj.step_xu(Eigen::all, steps).cast<long double>().rowwise().sum().cast<double>();
    const Matrix rxx = symmetrize(unvec(sxx, n, n));
    const Matrix rxu = unvec(sxu, n, m);

    gdx.row(i) = vec(symmetrize(rdx)).transpose();
    gxx.row(i) = vec(rxx).transpose();
    gux.row(i) = vec(Matrix(rxu.transpose())).transpose();
  }
  return IRLData(std::move(gdx), std::move(gxx), std::move(gux), n, m);
}

Identified ls_identify(const CLData& data) {
  const Matrix ba = data.xbar() * data.stacked_pinv();
  return {ba.rightCols(data.n()), ba.leftCols(data.m())};
}

Identified structured_identify(const IRLData& data) {
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();
  const Eigen::Index t = data.samples();
  const Matrix eye = Matrix::Identity(n, n);
  const Matrix cnn = commutation_matrix(n, n);
  const Matrix cnm = commutation_matrix(n, m);

  Matrix regressor(t * n * n, n * n + n * m);
  Vector target(t * n * n);
  for (Eigen::Index i = 0; i < t; ++i) {
    const Matrix rxx = data.r_xx(i);
    const Matrix rxu = data.r_xu(i);
    // vec(A rxx + rxx A^T) and vec(B rxu^T + rxu B^T) as linear maps of vec(A), vec(B).
    regressor.block(i * n * n, 0, n * n, n * n) = kron(rxx, eye) + kron(eye, rxx) * cnn;
    regressor.block(i * n * n, n * n, n * n, n * m) = kron(rxu, eye) + kron(eye, rxu) * cnm;
    target.segment(i * n * n, n * n) = vec(data.r_dx(i));
  }
  if (numerical_rank(regressor) != n * n + n * m) {
    throw Error(ErrorCode::DataNotInformative, "structured_identify: regressor is rank deficient");
  }
  const Vector theta = regressor.colPivHouseholderQr().solve(target);
  return {unvec(Vector(theta.head(n * n)), n, n), unvec(Vector(theta.tail(n * m)), n, m)};
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidArgument, "cannot open " + path);
  const Eigen::Index n = traj.x.rows();
  const Eigen::Index m = traj.u.rows();
  out << "t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i + 1;
  for (Eigen::Index j = 0; j < m; ++j) out << ",u" << j + 1;
  out << '\n';
  char buf[64];
  for (Eigen::Index k = 0; k <= traj.steps(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", traj.time(k));
    out << buf;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", traj.x(i, k));
      out << buf;
    }
    const Eigen::Index kk = std::min(k, traj.steps() - 1);
    for (Eigen::Index j = 0; j < m; ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", traj.u(j, kk));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace ddlqr
