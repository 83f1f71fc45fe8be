#pragma once

// Dense primal-dual interior-point solver for
//
//   minimize    c^T y + c0
//   subject to  E y = e,  F_j(y) = F_j0 + sum_i y_i F_ji >= 0  (PSD),
//
// plus a small affine-expression layer for writing such programs with
// matrix-valued decision variables.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ddlqr/linalg.hpp"

namespace ddlqr {

/// Matrix-valued affine function of the decision vector:
/// value(y) = offset + sum_i y_i unvec(coef.col(i)).
class Affine {
 public:
  Affine() = default;
  Affine(Matrix offset, Matrix coef);
  explicit Affine(const Matrix& constant);  // no variables

  [[nodiscard]] Eigen::Index rows() const { return offset_.rows(); }
  [[nodiscard]] Eigen::Index cols() const { return offset_.cols(); }
  [[nodiscard]] Eigen::Index vars() const { return coef_.cols(); }
  [[nodiscard]] const Matrix& offset() const { return offset_; }
  [[nodiscard]] const Matrix& coef() const { return coef_; }

  [[nodiscard]] Matrix value(const Vector& y) const;
  [[nodiscard]] Affine transpose() const;
  [[nodiscard]] Affine padded(Eigen::Index vars) const;

 private:
  Matrix offset_;
  Matrix coef_;  // rows()*cols() x vars()
};

[[nodiscard]] Affine operator+(const Affine& a, const Affine& b);
[[nodiscard]] Affine operator-(const Affine& a, const Affine& b);
[[nodiscard]] Affine operator+(const Affine& a, const Matrix& b);
[[nodiscard]] Affine operator+(const Matrix& a, const Affine& b);
[[nodiscard]] Affine operator-(const Affine& a);
[[nodiscard]] Affine operator*(double s, const Affine& a);
[[nodiscard]] Affine operator*(const Matrix& l, const Affine& a);
[[nodiscard]] Affine operator*(const Affine& a, const Matrix& r);
[[nodiscard]] Affine trace(const Affine& a);
/// Block matrix from rows of blocks; all blocks in a row share a height.
[[nodiscard]] Affine block(const std::vector<std::vector<Affine>>& rows);

struct LmiBlock {
  Matrix F0;  ///< d x d
  Matrix F;   ///< d^2 x vars, column i = vec(F_i)

  [[nodiscard]] Eigen::Index dim() const { return F0.rows(); }
};

struct ConicProblem {
  Vector c;
  double c0 = 0.0;
  Matrix E;  ///< p x vars
  Vector e;
  std::vector<LmiBlock> blocks;

  [[nodiscard]] Eigen::Index vars() const { return c.size(); }
  /// Throws InvalidArgument on inconsistent dimensions or asymmetric blocks.
  void validate() const;
};

struct SolverSettings {
  double tolerance = 1e-8;
  int max_iterations = 200;
  double psd_shift = 1e-9;  ///< strict inequalities X > 0 become X >= psd_shift I
  bool verbose = false;     ///< one line per iteration on stderr
};

enum class ConicStatus { Optimal, Infeasible, MaxIter, Numerical };

[[nodiscard]] std::string to_string(ConicStatus s);

struct ConicSolution {
  ConicStatus status = ConicStatus::Numerical;
  Vector y;
  Vector lambda;           ///< equality multipliers
  std::vector<Matrix> X;   ///< one PSD multiplier per block
  double objective = 0.0;  ///< c^T y + c0
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  std::string detail;
};

[[nodiscard]] ConicSolution solve(const ConicProblem& prob, const SolverSettings& settings = {});

/// Any solver with the signature of solve(); lets an external code stand in.
using ConicBackend = std::function<ConicSolution(const ConicProblem&, const SolverSettings&)>;

void dump(std::ostream& os, const ConicProblem& prob);

/// Collects variables and constraints in the order they are declared.
class ProblemBuilder {
 public:
  /// Symmetric n x n variable, parameterized by its vech.
  [[nodiscard]] Affine symmetric(Eigen::Index n);
  [[nodiscard]] Affine matrix(Eigen::Index rows, Eigen::Index cols);

  void minimize(const Affine& f);
  void maximize(const Affine& f);
  void equal(const Affine& lhs, const Matrix& rhs);
  void psd(const Affine& m);

  [[nodiscard]] Eigen::Index vars() const { return vars_; }
  [[nodiscard]] ConicProblem build() const;

 private:
  Eigen::Index vars_ = 0;
  Affine objective_{Matrix::Zero(1, 1)};
  std::vector<std::pair<Affine, Matrix>> equalities_;
  std::vector<Affine> lmis_;
};

}  // namespace ddlqr
