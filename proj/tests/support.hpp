#pragma once

// Fixtures shared by the unit tests. Plants are drawn here independently of
// the benchmark generator so that a bug there cannot hide a bug in a solver.

#include <cstdint>
#include <random>

#include "ddlqr/oracle.hpp"
#include "ddlqr/sim.hpp"
#include "ddlqr/system.hpp"

namespace testing {

using ddlqr::Matrix;
using ddlqr::Vector;

inline Matrix gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                       double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = normal(rng);
  return out;
}

inline ddlqr::LinearSystem random_plant(std::uint64_t seed, Eigen::Index n = 4,
                                        Eigen::Index m = 2) {
  std::mt19937_64 rng(seed);
  for (;;) {
    ddlqr::LinearSystem sys{gaussian(rng, n, n), gaussian(rng, n, m), Matrix::Identity(n, n),
                            Matrix::Identity(m, m)};
    if (ddlqr::is_stabilizable(sys.A, sys.B)) return sys;
  }
}

inline ddlqr::LinearSystem double_integrator() {
  Matrix a(2, 2);
  a << 0, 1, 0, 0;
  Matrix b(2, 1);
  b << 0, 1;
  return {a, b, Matrix::Identity(2, 2), Matrix::Identity(1, 1)};
}

struct Dataset {
  ddlqr::Trajectory traj;
  ddlqr::CLData cl;
  ddlqr::IRLData irl;
};

/// One excitation run shared by both parameterizations; redraws the
/// excitation (as the benchmark does) when either data set is not informative.
inline Dataset collect(const ddlqr::LinearSystem& sys, std::uint64_t seed, int windows = 20,
                       double window = 0.1, int attempts = 5) {
  for (int attempt = 0;; ++attempt) {
    const std::uint64_t s = seed + 7919ULL * std::uint64_t(attempt);
    std::mt19937_64 rng(s ^ 0x9e3779b97f4a7c15ULL);
    const Vector x0 = gaussian(rng, sys.n(), 1);
    ddlqr::ExcitationConfig ex;
    ex.seed = s;
    auto traj = ddlqr::simulate_zoh(sys, x0, ex, windows * window);
    const auto sched = ddlqr::SampleSchedule::consecutive(windows, window);
    try {
      auto cl = ddlqr::collect_cl_data(traj, sched);
      auto irl = ddlqr::collect_irl_data(traj, sched);
      return {std::move(traj), std::move(cl), std::move(irl)};
    } catch (const ddlqr::Error& e) {
      if (e.code() != ddlqr::ErrorCode::DataNotInformative || attempt + 1 >= attempts) throw;
    }
  }
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace testing
