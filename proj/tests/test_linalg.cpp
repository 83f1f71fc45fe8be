#include <random>

#include "doctest.h"
#include "ddlqr/linalg.hpp"
#include "support.hpp"

using namespace ddlqr;
using testing::gaussian;

TEST_CASE("vec and unvec round-trip column-major") {
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const Vector v = vec(m);
  CHECK(v(1) == 4);
  CHECK(v(2) == 2);
  CHECK(unvec(v, 2, 3) == m);
  CHECK_THROWS_AS((void)unvec(v, 4, 2), Error);
}

TEST_CASE("vech, duplication and commutation matrices") {
  std::mt19937_64 rng(1);
  for (Eigen::Index n = 1; n <= 5; ++n) {
    const Matrix s = symmetrize(gaussian(rng, n, n));
    const Vector h = vech(s);
    CHECK(h.size() == vech_size(n));
    CHECK(unvech(h) == s);
    CHECK((duplication_matrix(n) * h - vec(s)).norm() == 0.0);
  }
  for (Eigen::Index r = 1; r <= 4; ++r) {
    for (Eigen::Index c = 1; c <= 4; ++c) {
      const Matrix m = gaussian(rng, r, c);
      CHECK((commutation_matrix(r, c) * vec(m) - vec(Matrix(m.transpose()))).norm() == 0.0);
    }
  }
  Matrix asym(2, 2);
  asym << 1, 2, 0, 1;
  CHECK_THROWS_AS((void)vech(asym), Error);
}

TEST_CASE("kron obeys the vec identity") {
  std::mt19937_64 rng(2);
  const Matrix a = gaussian(rng, 3, 2), x = gaussian(rng, 2, 4), b = gaussian(rng, 4, 5);
  const Matrix axb = a * x * b;
  CHECK((kron(Matrix(b.transpose()), a) * vec(x) - vec(axb)).norm() < 1e-12);
}

TEST_CASE("pinv satisfies the Penrose conditions, including rank-deficient input") {
  std::mt19937_64 rng(3);
  const Matrix low = gaussian(rng, 6, 2) * gaussian(rng, 2, 5);
  for (const Matrix& a : {gaussian(rng, 4, 7), gaussian(rng, 7, 4), low}) {
    const Matrix p = pinv(a);
    CHECK((a * p * a - a).norm() < 1e-10);
    CHECK((p * a * p - p).norm() < 1e-10);
    CHECK(((a * p).transpose() - a * p).norm() < 1e-10);
    CHECK(((p * a).transpose() - p * a).norm() < 1e-10);
  }
  CHECK(numerical_rank(low) == 2);
  const Matrix n = null_basis(low);
  CHECK(n.cols() == 3);
  CHECK((low * n).norm() < 1e-10);
  CHECK((n.transpose() * n - Matrix::Identity(3, 3)).norm() < 1e-10);
}

TEST_CASE("nullspace projector") {
  std::mt19937_64 rng(4);
  const Matrix x = gaussian(rng, 3, 8);
  const Matrix pi = nullspace_projector(x);
  CHECK((x * pi).norm() < 1e-12);
  CHECK((pi * pi - pi).norm() < 1e-12);
  CHECK(std::abs(pi.trace() - 5.0) < 1e-12);
}

TEST_CASE("spectral report and Hurwitz test") {
  Matrix a(2, 2);
  a << -1, 5, 0, -2;
  const auto rep = spectral(a);
  CHECK(rep.hurwitz);
  CHECK(rep.abscissa == doctest::Approx(-1.0));
  CHECK(rep.margin == doctest::Approx(1.0));
  a(1, 1) = 0;
  CHECK_FALSE(is_hurwitz(a));
  Matrix rot(2, 2);
  rot << 0, 1, -1, 0;
  CHECK_FALSE(is_hurwitz(rot));
}

namespace {

// Trapezoid on a long horizon of the integral int_0^inf e^{A^T t} W e^{A t} dt.
Matrix lyapunov_by_quadrature(const Matrix& a, const Matrix& w) {
  const double h = 1e-3;
  const Matrix step = expm(Matrix(a * h));
  Matrix phi = Matrix::Identity(a.rows(), a.cols());
  Matrix sum = 0.5 * w;
  for (int k = 1; k < 60000; ++k) {
    phi = step * phi;
    sum += phi.transpose() * w * phi;
  }
  return h * sum;
}

}  // namespace

TEST_CASE("Lyapunov backends agree with each other and with quadrature") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a = gaussian(rng, 4, 4);
    a -= (spectral(a).abscissa + 0.5 + trial * 0.1) * Matrix::Identity(4, 4);
    const Matrix g = gaussian(rng, 4, 4);
    const Matrix w = g * g.transpose();
    const Matrix p1 = solve_lyapunov(a, w, LyapunovBackend::Vectorized);
    const Matrix p2 = solve_lyapunov(a, w, LyapunovBackend::BartelsStewart);
    CHECK((a.transpose() * p1 + p1 * a + w).norm() < 1e-10 * std::max(1.0, p1.norm()));
    CHECK((p1 - p2).norm() < 1e-9 * std::max(1.0, p1.norm()));
    CHECK(is_symmetric(p2, 1e-14));
    CHECK(min_eigenvalue_sym(p2) > -1e-10);
    const Matrix y = solve_lyapunov_dual(a, w);
    CHECK((a * y + y * a.transpose() + w).norm() < 1e-10 * std::max(1.0, y.norm()));
    if (trial < 3) CHECK(testing::rel_err(p2, lyapunov_by_quadrature(a, w)) < 1e-5);
  }
  Matrix unstable = Matrix::Identity(2, 2);
  CHECK_THROWS_AS((void)solve_lyapunov(unstable, unstable), Error);
}

TEST_CASE("scalar Lyapunov closed form") {
  Matrix a(1, 1), w(1, 1);
  a << -3.0;
  w << 2.0;
  CHECK(solve_lyapunov(a, w)(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("expm against series, rotations and inverse") {
  std::mt19937_64 rng(6);
  const Matrix small = 0.1 * gaussian(rng, 5, 5);
  Matrix series = Matrix::Identity(5, 5), term = Matrix::Identity(5, 5);
  for (int k = 1; k < 30; ++k) {
    term = term * small / double(k);
    series += term;
  }
  CHECK((expm(small) - series).norm() < 1e-14);

  const double th = 7.3;
  Matrix gen(2, 2);
  gen << 0, -th, th, 0;
  const Matrix r = expm(gen);
  CHECK(r(0, 0) == doctest::Approx(std::cos(th)).epsilon(1e-12));
  CHECK(r(1, 0) == doctest::Approx(std::sin(th)).epsilon(1e-12));

  const Matrix big = 3.0 * gaussian(rng, 4, 4);
  CHECK((expm(big) * expm(Matrix(-big)) - Matrix::Identity(4, 4)).norm() < 1e-8);
  CHECK((expm(Matrix::Zero(3, 3)) - Matrix::Identity(3, 3)).norm() < 1e-15);
}
