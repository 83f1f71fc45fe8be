#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "ddlqr/cl.hpp"
#include "ddlqr/irl.hpp"
#include "ddlqr/sdp.hpp"
#include "support.hpp"

using namespace ddlqr;

namespace {

LinearSystem scalar_plant() {
  return {Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

struct Case {
  LinearSystem sys;
  testing::Dataset data;
  CareSolution care;
};

const std::vector<Case>& cases() {
  static const std::vector<Case> all = [] {
    std::vector<Case> out;
    for (std::uint64_t s = 0; s < 8; ++s) {
      const LinearSystem sys = testing::random_plant(300 + s);
      out.push_back({sys, testing::collect(sys, 900 + s), care_solve(sys)});
    }
    return out;
  }();
  return all;
}

}  // namespace

TEST_CASE("model-based pair: Riccati LMI attains P* and strong duality holds") {
  const LinearSystem di = testing::double_integrator();
  const DualityReport r = solve_model_pair(di);
  Matrix p(2, 2);
  p << std::sqrt(3.0), 1, 1, std::sqrt(3.0);
  CHECK((r.P - p).norm() < 1e-6);
  CHECK(std::abs(r.riccati_value - r.gramian_value) < 1e-6);
  CHECK((r.K_gramian - r.K_riccati).norm() < 1e-3);

  const DualityReport s = solve_model_pair(scalar_plant());
  CHECK(std::abs(s.riccati_value - (1.0 + std::sqrt(2.0))) < 1e-6);
  CHECK(std::abs(s.gramian_value - (1.0 + std::sqrt(2.0))) < 1e-6);

  for (const Case& c : cases()) {
    const DualityReport m = solve_model_pair(c.sys);
    CHECK(std::abs(m.riccati_value - m.gramian_value) <= 1e-6 * std::max(1.0, m.riccati_value));
    CHECK(testing::rel_err(m.P, c.care.Pstar) < 1e-6);
  }
}

TEST_CASE("every data-driven program recovers the double-integrator gain") {
  const LinearSystem di = testing::double_integrator();
  const auto d = testing::collect(di, 11);
  const Weights w = di.weights();
  Matrix k(1, 2);
  k << 1, std::sqrt(3.0);
  CHECK((solve_cl1(d.cl, w).K - k).norm() < 1e-2);
  CHECK((solve_cl2(d.cl, w).K - k).norm() < 1e-4);
  CHECK((solve_cl3(d.cl, w).K - k).norm() < 1e-4);
  CHECK((solve_irl1(d.irl, w).K - k).norm() < 1e-4);
  CHECK((solve_irl2(d.irl, w).K - k).norm() < 1e-4);
}

TEST_CASE("CL1: feasible, stabilizing and least accurate") {
  std::vector<double> err;
  for (const Case& c : cases()) {
    const Cl1Result r = solve_cl1(c.data.cl, c.sys.weights());
    CHECK((c.data.cl.xtilde() * r.G - Matrix::Identity(4, 4)).norm() < 1e-6);
    CHECK(is_hurwitz(Matrix(c.data.cl.xbar() * r.G)));
    CHECK(min_eigenvalue_sym(r.Y) > 0);
    err.push_back((r.K - c.care.Kstar).norm());
  }
  CHECK(median(err) < 1e-2);
}

TEST_CASE("CL2: gain and Riccati matrix from the inverse of S") {
  std::vector<double> err, perr, objerr;
  for (const Case& c : cases()) {
    const Cl2Result r = solve_cl2(c.data.cl, c.sys.weights());
    err.push_back((r.K - c.care.Kstar).norm());
    perr.push_back((r.P - c.care.Pstar).norm());
    objerr.push_back(std::abs(r.S.trace() - c.care.Pstar.inverse().trace()));
  }
  CHECK(median(err) < 1e-5);
  CHECK(median(perr) < 1e-4);
  CHECK(median(objerr) < 1e-4);
}

TEST_CASE("CL3: Riccati matrix, saturated F(P) and recovered gain") {
  for (const Case& c : cases()) {
    const Weights w = c.sys.weights();
    const Cl3Result r = solve_cl3(c.data.cl, w);
    CHECK((r.P - c.care.Pstar).norm() < 1e-5);
    CHECK((r.K - c.care.Kstar).norm() < 1e-4);
    const Matrix f = ClCareOperator(c.data.cl, w).f_matrix(r.P);
    CHECK(min_eigenvalue_sym(f) >= -1e-8 * std::max(1.0, f.norm()));
  }
}

TEST_CASE("IRL1: exact relaxation with saturated constraints") {
  for (const Case& c : cases()) {
    const Weights w = c.sys.weights();
    const Irl1Result r = solve_irl1(c.data.irl, w);
    CHECK((r.K - c.care.Kstar).norm() < 1e-4);
    CHECK(r.slack <= 1e-6);
    for (Eigen::Index i = 0; i < c.data.irl.samples(); ++i) {
      const double scale = std::max(1.0, (w.Q * c.data.irl.r_xx(i)).trace());
      CHECK(std::abs(f_i(c.data.irl, i, w, r.P, r.W)) <= 1e-6 * scale);
    }
  }
}

TEST_CASE("IRL2: Riccati inequality saturates at the optimum") {
  for (const Case& c : cases()) {
    const Weights w = c.sys.weights();
    const Irl2Result r = solve_irl2(c.data.irl, w);
    CHECK((r.K - c.care.Kstar).norm() < 1e-4);
    const Matrix sat = r.H + w.Q - r.K.transpose() * w.R * r.K;
    CHECK(min_eigenvalue_sym(symmetrize(sat)) >= -1e-7);
    CHECK(sat.norm() < 1e-5 * std::max(1.0, r.P.norm()));
    CHECK(std::abs(r.P.trace() - c.care.Pstar.trace()) < 1e-4);
  }
}

TEST_CASE("the five programs agree with each other") {
  for (const Case& c : cases()) {
    const Weights w = c.sys.weights();
    const std::vector<Matrix> ks = {solve_cl1(c.data.cl, w).K, solve_cl2(c.data.cl, w).K,
                                    solve_cl3(c.data.cl, w).K, solve_irl1(c.data.irl, w).K,
                                    solve_irl2(c.data.irl, w).K};
    for (std::size_t i = 0; i < ks.size(); ++i)
      for (std::size_t j = i + 1; j < ks.size(); ++j) CHECK((ks[i] - ks[j]).norm() < 2e-2);
  }
}

TEST_CASE("CL1 and CL2 optimal values are reported side by side") {
  // Whether these two programs are dual is open; record the numbers only.
  const Case& c = cases().front();
  const Weights w = c.sys.weights();
  const double v1 = solve_cl1(c.data.cl, w).solution.objective;
  const double v2 = solve_cl2(c.data.cl, w).solution.objective;
  MESSAGE("CL1 value " << v1 << ", CL2 value " << v2);
  CHECK(std::isfinite(v1));
  CHECK(std::isfinite(v2));
}

TEST_CASE("backends are pluggable and failures surface as errors") {
  const Case& c = cases().front();
  const Weights w = c.sys.weights();
  int calls = 0;
  const ConicBackend counting = [&](const ConicProblem& p, const SolverSettings& s) {
    ++calls;
    return solve(p, s);
  };
  const Cl3Result a = solve_cl3(c.data.cl, w, {}, counting);
  const Cl3Result b = solve_cl3(c.data.cl, w);
  CHECK(calls == 1);
  CHECK(a.solution.iterations == b.solution.iterations);
  CHECK(a.solution.objective == b.solution.objective);

  const ConicBackend failing = [](const ConicProblem&, const SolverSettings&) {
    ConicSolution s;
    s.status = ConicStatus::MaxIter;
    return s;
  };
  try {
    (void)solve_irl2(c.data.irl, w, {}, failing);
    FAIL("expected a solver failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SolverFailure);
  }
}
