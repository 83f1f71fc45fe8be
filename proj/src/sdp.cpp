#include "ddlqr/sdp.hpp"

#include "ddlqr/cl.hpp"
#include "ddlqr/error.hpp"

namespace ddlqr {

namespace {

constexpr double kMaxCondition = 1e12;

Matrix eye(Eigen::Index n) { return Matrix::Identity(n, n); }

ConicSolution run(const ConicProblem& prob, const SolverSettings& settings,
                  const ConicBackend& backend, const char* name) {
  ConicSolution sol = backend ? backend(prob, settings) : solve(prob, settings);
  if (sol.status != ConicStatus::Optimal) {
    throw Error(ErrorCode::SolverFailure, std::string(name) + ": solver status " +
                                              to_string(sol.status) +
                                              (sol.detail.empty() ? "" : " (" + sol.detail + ")"));
  }
  return sol;
}

// Inverse of an optimizer that must be positive definite.
Matrix checked_inverse(const Matrix& m, const char* name) {
  const Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(es.eigenvalues().size() - 1);
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    throw Error(ErrorCode::Numerical, std::string(name) + ": degenerate optimizer");
  }
  return es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

Affine shifted(const Affine& m, double eps) { return m + Matrix(-eps * eye(m.rows())); }

}  // namespace

RiccatiProgram build_riccati_lmi(const LinearSystem& sys) {
  ProblemBuilder b;
  const Affine p = b.symmetric(sys.n());
  b.maximize(trace(p));
  const Affine pb = p * sys.B;
  b.psd(block({{sys.A.transpose() * p + p * sys.A + sys.Q, pb}, {pb.transpose(), Affine(sys.R)}}));
  b.psd(p);
  return {b.build(), p};
}

GramianProgram build_gramian_lmi(const LinearSystem& sys, const SolverSettings& settings) {
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  ProblemBuilder b;
  const Affine y = b.symmetric(n);
  const Affine z = b.matrix(m, n);
  const Affine s = b.symmetric(m);
  b.minimize(trace(sys.Q * y) + trace(s));
  const Affine rz = sym_sqrt(sys.R) * z;
  b.psd(block({{s, rz}, {rz.transpose(), y}}));
  const Affine lyap = sys.A * y - sys.B * z;
  b.psd(-(lyap + lyap.transpose()) + Matrix(-eye(n)));
  b.psd(shifted(y, settings.psd_shift));
  return {b.build(), y, z, s};
}

DualityReport solve_model_pair(const LinearSystem& sys, const SolverSettings& settings,
                               const ConicBackend& backend) {
  const RiccatiProgram primal = build_riccati_lmi(sys);
  const GramianProgram dual = build_gramian_lmi(sys, settings);
  const ConicSolution ps = run(primal.problem, settings, backend, "riccati LMI");
  const ConicSolution ds = run(dual.problem, settings, backend, "gramian LMI");
  DualityReport out;
  out.P = symmetrize(primal.P.value(ps.y));
  out.riccati_value = out.P.trace();
  out.K_riccati = sys.R.llt().solve(Matrix(sys.B.transpose() * out.P));
  out.gramian_value = ds.objective;
  out.K_gramian = dual.Z.value(ds.y) * checked_inverse(dual.Y.value(ds.y), "gramian LMI");
  return out;
}

Cl1Program build_cl1(const CLData& data, const Weights& w, const SolverSettings& settings) {
  const Eigen::Index n = data.n();
  ProblemBuilder b;
  const Affine y = b.symmetric(n);
  const Affine z = b.matrix(data.samples(), n);
  const Affine s = b.symmetric(data.m());
  b.minimize(trace(w.Q * y) + trace(s));
  const Affine ruz = Matrix(sym_sqrt(w.R) * data.utilde()) * z;
  b.psd(block({{s, ruz}, {ruz.transpose(), y}}));
  const Affine xz = data.xbar() * z;
  b.psd(-(xz + xz.transpose()) + Matrix(-eye(n)));
  b.equal(y - data.xtilde() * z, Matrix::Zero(n, n));
  b.psd(shifted(y, settings.psd_shift));
  return {b.build(), y, z, s};
}

Cl1Result solve_cl1(const CLData& data, const Weights& w, const SolverSettings& settings,
                    const ConicBackend& backend) {
  const Cl1Program prog = build_cl1(data, w, settings);
  Cl1Result out;
  out.solution = run(prog.problem, settings, backend, "sdp-cl1");
  const Vector& v = out.solution.y;
  out.Y = symmetrize(prog.Y.value(v));
  out.Z = prog.Z.value(v);
  out.S = symmetrize(prog.S.value(v));
  out.G = out.Z * checked_inverse(out.Y, "sdp-cl1");
  out.K = -data.utilde() * out.G;
  return out;
}

Cl2Program build_cl2(const CLData& data, const Weights& w, const SolverSettings& settings) {
  const Eigen::Index n = data.n();
  const Eigen::Index m = data.m();
  ProblemBuilder b;
  const Affine z = b.matrix(data.samples(), n);
  const Affine s = b.symmetric(n);
  b.maximize(trace(s));
  const Matrix qh = sym_sqrt(w.Q);
  const Affine xz = data.xbar() * z;
  const Affine uz = data.utilde() * z;
  const Affine sq = qh * s;
  const Affine lmi = block({
      {xz + xz.transpose(), uz.transpose(), sq.transpose()},
      {uz, Affine(Matrix(-w.R.inverse())), Affine(Matrix::Zero(m, n))},
      {sq, Affine(Matrix::Zero(n, m)), Affine(Matrix(-eye(n)))},
  });
  b.psd(-lmi);
  const Matrix& kern = data.kernel();
  const Matrix urn = kern.transpose() * data.utilde().transpose() * w.R * data.utilde();
  b.equal(urn * z, Matrix(-kern.transpose() * data.xbar().transpose()));
  b.equal(s - data.xtilde() * z, Matrix::Zero(n, n));
  b.psd(shifted(s, settings.psd_shift));
  return {b.build(), z, s};
}

Cl2Result solve_cl2(const CLData& data, const Weights& w, const SolverSettings& settings,
                    const ConicBackend& backend) {
  const Cl2Program prog = build_cl2(data, w, settings);
  Cl2Result out;
  out.solution = run(prog.problem, settings, backend, "sdp-cl2");
  out.Z = prog.Z.value(out.solution.y);
  out.S = symmetrize(prog.S.value(out.solution.y));
  out.P = checked_inverse(out.S, "sdp-cl2");
  out.K = -data.utilde() * out.Z * out.P;
  return out;
}

Cl3Program build_cl3(const CLData& data, const Weights& w) {
  ProblemBuilder b;
  const Affine p = b.symmetric(data.n());
  b.maximize(trace(p));
  const Affine cross = data.xtilde().transpose() * p * data.xbar();
  const Matrix& u = data.utilde();
  const Matrix& x = data.xtilde();
  b.psd(cross + cross.transpose() +
        symmetrize(Matrix(u.transpose() * w.R * u + x.transpose() * w.Q * x)));
  b.psd(p);
  return {b.build(), p};
}

Cl3Result solve_cl3(const CLData& data, const Weights& w, const SolverSettings& settings,
                    const ConicBackend& backend) {
  const Cl3Program prog = build_cl3(data, w);
  Cl3Result out;
  out.solution = run(prog.problem, settings, backend, "sdp-cl3");
  out.P = symmetrize(prog.P.value(out.solution.y));
  out.K = ClCareOperator(data, w).gain(out.P);
  return out;
}

Irl1Program build_irl1(const IRLData& data, const Weights& w) {
  const Eigen::Index n = data.n();
  ProblemBuilder b;
  const Affine p = b.symmetric(n);
  const Affine wm = b.matrix(n, data.m());
  const Affine z = b.symmetric(n);
  b.maximize(trace(p));
  for (Eigen::Index i = 0; i < data.samples(); ++i) {
    const Matrix rxx = data.r_xx(i);
    const Affine lhs = trace(p * data.r_dx(i)) - trace(z * rxx) -
                       2.0 * trace(wm.transpose() * data.r_xu(i));
    b.equal(lhs, Matrix::Constant(1, 1, -(w.Q * rxx).trace()));
  }
  b.psd(block({{z, wm}, {wm.transpose(), Affine(w.R)}}));
  b.psd(p);
  return {b.build(), p, wm, z};
}

Irl1Result solve_irl1(const IRLData& data, const Weights& w, const SolverSettings& settings,
                      const ConicBackend& backend) {
  const Irl1Program prog = build_irl1(data, w);
  Irl1Result out;
  out.solution = run(prog.problem, settings, backend, "sdp-irl1");
  const Vector& v = out.solution.y;
  out.P = symmetrize(prog.P.value(v));
  out.W = prog.W.value(v);
  out.Z = symmetrize(prog.Z.value(v));
  const Eigen::LLT<Matrix> r(w.R);
  out.K = r.solve(Matrix(out.W.transpose()));
  out.slack = (out.Z - out.W * r.solve(Matrix(out.W.transpose()))).norm();
  return out;
}

Irl2Program build_irl2(const IRLData& data, const Weights& w, const SolverSettings& settings) {
  const Eigen::Index n = data.n();
  ProblemBuilder b;
  const Affine p = b.symmetric(n);
  const Affine h = b.symmetric(n);
  const Affine kp = b.matrix(data.m(), n);
  b.maximize(trace(p));
  // Row i of [Gamma^xx D, 2 Gamma^ux (I kron R)] [vech H; vec K+] = Gamma^dx vec P.
  for (Eigen::Index i = 0; i < data.samples(); ++i) {
    const Affine lhs = trace(h * data.r_xx(i)) + 2.0 * trace(Matrix(data.r_xu(i) * w.R) * kp) -
                       trace(p * data.r_dx(i));
    b.equal(lhs, Matrix::Zero(1, 1));
  }
  b.psd(block({{h + w.Q, kp.transpose()}, {kp, Affine(Matrix(w.R.inverse()))}}));
  b.psd(shifted(p, settings.psd_shift));
  return {b.build(), p, h, kp};
}

Irl2Result solve_irl2(const IRLData& data, const Weights& w, const SolverSettings& settings,
                      const ConicBackend& backend) {
  const Irl2Program prog = build_irl2(data, w, settings);
  Irl2Result out;
  out.solution = run(prog.problem, settings, backend, "sdp-irl2");
  const Vector& v = out.solution.y;
  out.P = symmetrize(prog.P.value(v));
  out.H = symmetrize(prog.H.value(v));
  out.K = prog.Kplus.value(v);
  return out;
}

}  // namespace ddlqr
