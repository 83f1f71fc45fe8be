#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "ddlqr/conic.hpp"
#include "support.hpp"

using namespace ddlqr;
using testing::gaussian;

namespace {

Matrix value_of(const LmiBlock& b, const Vector& y) {
  return b.F0 + unvec(Vector(b.F * y), b.dim(), b.dim());
}

// Optimality checked from the definition, on the problem as posed.
void check_kkt(const ConicProblem& p, const ConicSolution& s, double tol) {
  Vector adj = p.E.rows() ? Vector(p.E.transpose() * s.lambda) : Vector::Zero(p.vars());
  double compl_sum = 0.0;
  for (std::size_t j = 0; j < p.blocks.size(); ++j) {
    const Matrix f = value_of(p.blocks[j], s.y);
    CHECK(min_eigenvalue_sym(f) >= -tol * (1.0 + f.norm()));
    CHECK(min_eigenvalue_sym(s.X[j]) >= -tol * (1.0 + s.X[j].norm()));
    adj += p.blocks[j].F.transpose() * vec(s.X[j]);
    compl_sum += (s.X[j] * f).trace();
  }
  if (p.E.rows()) CHECK((p.E * s.y - p.e).norm() <= tol * (1.0 + p.e.norm()));
  CHECK((p.c - adj).norm() <= 10 * tol * (1.0 + p.c.norm()));
  CHECK(std::abs(compl_sum) <= 10 * tol * (1.0 + std::abs(s.objective)));
}

}  // namespace

TEST_CASE("affine expressions evaluate like the matrices they describe") {
  std::mt19937_64 rng(3);
  ProblemBuilder b;
  const Affine x = b.matrix(3, 2);
  const Affine s = b.symmetric(3);
  Vector y(b.vars());
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = gaussian(rng, 1, 1)(0, 0);
  const Matrix xv = x.value(y);
  const Matrix sv = s.value(y);
  CHECK(sv == sv.transpose());
  CHECK(vech(sv) == y.tail(6));
  const Matrix l = gaussian(rng, 4, 3);
  const Matrix r = gaussian(rng, 2, 5);
  CHECK(((l * x * r).value(y) - l * xv * r).norm() < 1e-12);
  CHECK((x.transpose().value(y) - xv.transpose()).norm() == 0.0);
  CHECK(std::abs(trace(s).value(y)(0, 0) - sv.trace()) < 1e-12);
  const Affine blk = block({{s, x}, {x.transpose(), Affine(Matrix::Identity(2, 2))}});
  Matrix expect(5, 5);
  expect << sv, xv, xv.transpose(), Matrix::Identity(2, 2);
  CHECK((blk.value(y) - expect).norm() == 0.0);
  CHECK(((s - 2.0 * s + Matrix::Ones(3, 3)).value(y) - (Matrix::Ones(3, 3) - sv)).norm() < 1e-12);
  CHECK_THROWS_AS((void)(x + s), Error);
  CHECK_THROWS_AS((void)block({{s, x}, {x}}), Error);
}

TEST_CASE("min tr(P) subject to P >= I") {
  ProblemBuilder b;
  const Affine p = b.symmetric(2);
  b.minimize(trace(p));
  b.psd(p + Matrix(-Matrix::Identity(2, 2)));
  const ConicProblem prob = b.build();
  const ConicSolution sol = solve(prob);
  REQUIRE(sol.status == ConicStatus::Optimal);
  CHECK(std::abs(sol.objective - 2.0) < 1e-7);
  CHECK((p.value(sol.y) - Matrix::Identity(2, 2)).norm() < 1e-6);
  CHECK(sol.primal_residual <= 1e-8);
  CHECK(sol.dual_residual <= 1e-8);
  CHECK(sol.gap <= 1e-8);
  check_kkt(prob, sol, 1e-7);
}

TEST_CASE("scalar Riccati inequality recovers 1 + sqrt(2)") {
  // a = b = q = r = 1: [2p + 1, p; p, 1] >= 0 iff p^2 - 2p - 1 <= 0.
  ProblemBuilder b;
  const Affine p = b.symmetric(1);
  const Affine one(Matrix::Ones(1, 1));
  b.maximize(p);
  b.psd(block({{2.0 * p + Matrix::Ones(1, 1), p}, {p, one}}));
  b.psd(p);
  const ConicProblem prob = b.build();
  const ConicSolution sol = solve(prob);
  REQUIRE(sol.status == ConicStatus::Optimal);
  CHECK(std::abs(p.value(sol.y)(0, 0) - (1.0 + std::sqrt(2.0))) < 1e-6);
  check_kkt(prob, sol, 1e-7);
}

TEST_CASE("P >= I with tr(P) = 1 is infeasible") {
  ProblemBuilder b;
  const Affine p = b.symmetric(2);
  b.minimize(trace(p));
  b.equal(trace(p), Matrix::Ones(1, 1));
  b.psd(p + Matrix(-Matrix::Identity(2, 2)));
  const ConicSolution sol = solve(b.build());
  CHECK(sol.status == ConicStatus::Infeasible);
}

TEST_CASE("inconsistent equalities and unbounded objectives are reported") {
  {
    ProblemBuilder b;
    const Affine x = b.matrix(1, 1);
    b.minimize(x);
    b.equal(x, Matrix::Ones(1, 1));
    b.equal(x, Matrix::Constant(1, 1, 2.0));
    b.psd(x);
    CHECK(solve(b.build()).status == ConicStatus::Infeasible);
  }
  {
    ProblemBuilder b;
    const Affine x = b.matrix(2, 1);
    const Affine x0 = Matrix(Matrix::Identity(1, 2)) * x;
    b.minimize(Matrix(Matrix::Ones(1, 2)) * x);
    b.psd(x0);  // x1 is unconstrained
    CHECK(solve(b.build()).status == ConicStatus::Infeasible);
  }
}

TEST_CASE("redundant equality rows do not disturb the solution") {
  // min x1 + x2 s.t. x >= 0, x1 + 2 x2 = 2 (stated three times) -> (0, 1).
  ProblemBuilder b;
  const Affine x = b.matrix(2, 1);
  Matrix row(1, 2);
  row << 1, 2;
  b.minimize(Matrix(Matrix::Ones(1, 2)) * x);
  b.equal(row * x, Matrix::Constant(1, 1, 2.0));
  b.equal(2.0 * (row * x), Matrix::Constant(1, 1, 4.0));
  b.equal(row * x, Matrix::Constant(1, 1, 2.0));
  b.psd(Matrix(Matrix::Identity(1, 2)) * x);
  b.psd(Matrix(Matrix::Identity(2, 2).bottomRows(1)) * x);
  const ConicProblem prob = b.build();
  const ConicSolution sol = solve(prob);
  REQUIRE(sol.status == ConicStatus::Optimal);
  CHECK(std::abs(sol.objective - 1.0) < 1e-7);
  CHECK(std::abs(sol.y(1) - 1.0) < 1e-7);
  check_kkt(prob, sol, 1e-7);
}

TEST_CASE("random strictly feasible LMIs satisfy the KKT conditions at the returned point") {
  // F0 > 0 makes y = 0 strictly feasible; c = A*(X0) with X0 > 0 bounds the objective.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Eigen::Index nv = 3 + Eigen::Index(seed % 4);
    ConicProblem p;
    p.c = Vector::Zero(nv);
    for (Eigen::Index d : {3, 4}) {
      LmiBlock blk;
      const Matrix g = gaussian(rng, d, d);
      blk.F0 = g * g.transpose() + Matrix::Identity(d, d);
      blk.F.resize(d * d, nv);
      for (Eigen::Index i = 0; i < nv; ++i) blk.F.col(i) = vec(symmetrize(gaussian(rng, d, d)));
      const Matrix h = gaussian(rng, d, d);
      const Matrix x0 = h * h.transpose() + 0.1 * Matrix::Identity(d, d);
      p.c += blk.F.transpose() * vec(x0);
      p.blocks.push_back(blk);
    }
    const ConicSolution sol = solve(p);
    REQUIRE(sol.status == ConicStatus::Optimal);
    check_kkt(p, sol, 1e-7);
  }
}

TEST_CASE("dimension mismatches throw") {
  ConicProblem p;
  p.c = Vector::Zero(2);
  p.blocks.push_back({Matrix::Identity(2, 2), Matrix::Zero(4, 3)});
  CHECK_THROWS_AS((void)solve(p), Error);
  p.blocks[0].F = Matrix::Zero(4, 2);
  p.E = Matrix::Zero(1, 2);
  CHECK_THROWS_AS((void)solve(p), Error);
  SolverSettings bad;
  bad.tolerance = 0.0;
  p.e = Vector::Zero(1);
  CHECK_THROWS_AS((void)solve(p, bad), Error);
}

TEST_CASE("solves are deterministic and the dump lists every part") {
  ProblemBuilder b;
  const Affine p = b.symmetric(2);
  b.maximize(trace(p));
  Matrix a(2, 2);
  a << 0, 1, -1, -1;
  const Affine lyap = -1.0 * (a.transpose() * p + p * a) + Matrix(-Matrix::Identity(2, 2));
  b.psd(lyap + Matrix(Matrix::Zero(2, 2)));
  b.psd(Matrix(Matrix::Identity(2, 2)) + (-1.0 * p) + Matrix(2.0 * Matrix::Identity(2, 2)));
  b.equal(Matrix(Matrix::Identity(1, 2)) * p * Matrix(Matrix::Identity(2, 1)), Matrix::Ones(1, 1));
  const ConicProblem prob = b.build();
  const ConicSolution s1 = solve(prob);
  const ConicSolution s2 = solve(prob);
  CHECK(s1.iterations == s2.iterations);
  CHECK(s1.objective == s2.objective);
  CHECK(s1.y == s2.y);
  std::ostringstream os;
  dump(os, prob);
  const std::string text = os.str();
  CHECK(text.find("variables 3") != std::string::npos);
  CHECK(text.find("equalities 1") != std::string::npos);
  CHECK(text.find("block 1 psd 2") != std::string::npos);
}
