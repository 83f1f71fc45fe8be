// ddlqr: command-line front end for the benchmark and the individual solvers.
//
// Exit codes: 0 ok, 1 usage, 2 data not informative, 3 solver failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "ddlqr/bench.hpp"
#include "ddlqr/error.hpp"
#include "ddlqr/io.hpp"

namespace fs = std::filesystem;
using namespace ddlqr;

namespace {

constexpr int kOk = 0, kUsage = 1, kNotInformative = 2, kSolverFailure = 3;

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::InvalidArgument: return kUsage;
    case ErrorCode::DataNotInformative: return kNotInformative;
    default: return kSolverFailure;
  }
}

std::string system_dir(const std::string& root, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "system_%03d", i);
  return (fs::path(root) / buf).string();
}

void print_matrix(const char* name, const Matrix& m) {
  std::cout << name << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) std::cout << (j ? "," : "") << format_double(m(i, j));
    std::cout << '\n';
  }
}

int cmd_gen(const std::string& config, const std::string& out_override) {
  ExperimentConfig cfg = load_config(config);
  const std::string root = out_override.empty() ? cfg.output_dir : out_override;
  fs::create_directories(root);
  int skipped = 0;
  for (int i = 0; i < cfg.num_systems; ++i) {
    Experiment ex;
    try {
      ex = prepare_experiment(cfg, i);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DataNotInformative) throw;
      std::cerr << e.what() << '\n';
      ++skipped;
      continue;
    }
    const fs::path dir = system_dir(root, i);
    fs::create_directories(dir);
    auto put = [&](const char* name, const Matrix& m) { write_matrix_csv((dir / name).string(), m); };
    // Data the solvers may read.
    put("Q.csv", ex.sys.Q);
    put("R.csv", ex.sys.R);
    put("K0.csv", ex.K0);
    put("xbar.csv", ex.cl->xbar());
    put("utilde.csv", ex.cl->utilde());
    put("xtilde.csv", ex.cl->xtilde());
    put("gamma_dx.csv", ex.irl->gamma_dx());
    put("gamma_xx.csv", ex.irl->gamma_xx());
    put("gamma_ux.csv", ex.irl->gamma_ux());
    write_trajectory_csv((dir / "trajectory.csv").string(), ex.traj);
    // Ground truth, only used for scoring.
    put("A.csv", ex.sys.A);
    put("B.csv", ex.sys.B);
    put("Pstar.csv", ex.care.Pstar);
    put("Kstar.csv", ex.care.Kstar);
  }
  std::cout << "wrote " << cfg.num_systems - skipped << " data sets to " << root << '\n';
  return skipped ? kNotInformative : kOk;
}

int cmd_solve(const std::string& method, const std::string& data, const std::string& config) {
  if (!is_method(method)) throw Error(ErrorCode::InvalidArgument, "unknown method '" + method + "'");
  const ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : load_config(config);
  const fs::path dir(data);
  auto get = [&](const char* name) { return read_matrix_csv((dir / name).string()); };
  const Weights w{get("Q.csv"), get("R.csv")};
  const Matrix k0 = needs_initial_gain(method) ? get("K0.csv") : Matrix();
  const Eigen::Index n = w.Q.rows(), m = w.R.rows();

  std::optional<CLData> cl;
  std::optional<IRLData> irl;
  if (uses_cl_data(method)) {
    cl.emplace(get("xbar.csv"), get("utilde.csv"), get("xtilde.csv"));
  } else {
    irl.emplace(get("gamma_dx.csv"), get("gamma_xx.csv"), get("gamma_ux.csv"), n, m);
  }
  const MethodOutput out = run_method(method, cl ? &*cl : nullptr, irl ? &*irl : nullptr, w, k0, cfg);

  const Matrix& k = out.gains.back();
  print_matrix("K", k);
  Matrix p;
  for (auto it = out.values.rbegin(); it != out.values.rend() && p.size() == 0; ++it) p = *it;
  if (p.size()) print_matrix("P", p);
  std::cout << "steps " << out.k_or_t.size() << '\n';
  if (fs::exists(dir / "Kstar.csv")) {
    std::cout << "residual_K " << format_double((k - get("Kstar.csv")).norm()) << '\n';
  }
  return kOk;
}

int cmd_bench(const std::string& config, const std::string& out_override) {
  ExperimentConfig cfg = load_config(config);
  const std::string out = out_override.empty() ? cfg.output_dir : out_override;
  int done = 0;
  const SuiteResult res = run_suite(cfg, [&](int) {
    ++done;
    std::cerr << "\rsystems " << done << '/' << cfg.num_systems << std::flush;
  });
  std::cerr << '\n';
  emit(out, res);
  std::cout << format_summary(res.summary);
  return kOk;
}

// Largest per-index gap between two methods' residual series over the
// systems present in both files.
double series_gap(const SeriesFile& a, const SeriesFile& b, bool use_p) {
  std::map<int, std::size_t> at;
  for (std::size_t i = 0; i < b.system_ids.size(); ++i) at[b.system_ids[i]] = i;
  double gap = 0.0;
  for (std::size_t i = 0; i < a.system_ids.size(); ++i) {
    const auto it = at.find(a.system_ids[i]);
    if (it == at.end()) continue;
    const auto& x = use_p ? a.residual_P[i] : a.residual_K[i];
    const auto& y = use_p ? b.residual_P[it->second] : b.residual_K[it->second];
    for (std::size_t k = 0; k < std::min(x.size(), y.size()); ++k)
      if (std::isfinite(x[k]) && std::isfinite(y[k])) gap = std::max(gap, std::abs(x[k] - y[k]));
  }
  return gap;
}

int cmd_compare(const std::string& out) {
  if (!fs::is_directory(out)) throw Error(ErrorCode::InvalidArgument, "no such directory " + out);
  std::map<std::string, SeriesFile> files;
  std::vector<MethodSummary> summary;
  for (const auto& id : method_ids()) {
    const fs::path p = fs::path(out) / (id + ".csv");
    if (!fs::exists(p)) continue;
    SeriesFile f = read_series_csv(p.string(), id);
    MethodSummary s;
    s.method = id;
    std::vector<double> k, pr;
    for (std::size_t i = 0; i < f.system_ids.size(); ++i) {
      k.push_back(f.residual_K[i].back());
      pr.push_back(f.residual_P[i].back());
    }
    s.runs = int(k.size());
    s.final_K = describe(k);
    s.final_P = describe(pr);
    summary.push_back(s);
    files.emplace(id, std::move(f));
  }
  if (files.empty()) throw Error(ErrorCode::InvalidArgument, "no method CSVs in " + out);
  std::cout << "final residual_K per method (failed runs excluded)\n" << format_summary(summary);

  auto both = [&](const char* a, const char* b) { return files.count(a) && files.count(b); };
  if (both("pi-cl", "pi-irl")) {
    std::cout << "PI CL vs IRL, max per-iteration residual gap: "
              << format_double(series_gap(files.at("pi-cl"), files.at("pi-irl"), false)) << '\n';
  }
  if (both("ricflow-cl", "ricflow-irl")) {
    std::cout << "Riccati flow CL vs IRL, max checkpoint gap in residual_P: "
              << format_double(series_gap(files.at("ricflow-cl"), files.at("ricflow-irl"), true)) << '\n';
  }
  if (both("vi-cl", "vi-irl")) {
    std::cout << "VI CL vs IRL, max per-iteration gap in residual_P: "
              << format_double(series_gap(files.at("vi-cl"), files.at("vi-irl"), true)) << '\n';
  }
  double worst_other = 0.0;
  for (const auto& s : summary)
    if (s.method.rfind("sdp-", 0) == 0 && s.method != "sdp-cl1") worst_other = std::max(worst_other, s.final_K.mean);
  for (const auto& s : summary)
    if (s.method == "sdp-cl1" && worst_other > 0) {
      std::cout << "CL1 mean residual / largest other SDP mean: " << format_double(s.final_K.mean / worst_other)
                << '\n';
    }
  const fs::path timing = fs::path(out) / "timing.csv";
  if (fs::exists(timing)) {
    std::ifstream is(timing);
    std::cout << "\ntiming (" << timing.string() << ")\n" << is.rdbuf();
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven continuous-time LQR"};
  app.require_subcommand(1);

  std::string config, out, method, data;
  auto* gen = app.add_subcommand("gen", "generate benchmark plants and data sets");
  gen->add_option("--config", config, "experiment config file")->required()->check(CLI::ExistingFile);
  gen->add_option("--out", out, "output directory (default: output_dir from the config)");

  auto* solve = app.add_subcommand("solve", "run one method on a data set directory");
  solve->add_option("--method", method, "method id")->required();
  solve->add_option("--data", data, "data set directory written by gen")->required()->check(CLI::ExistingDirectory);
  solve->add_option("--config", config, "optional config for method parameters")->check(CLI::ExistingFile);

  auto* bench = app.add_subcommand("bench", "run the benchmark suite");
  bench->add_option("--config", config, "experiment config file")->required()->check(CLI::ExistingFile);
  bench->add_option("--out", out, "output directory")->required();

  auto* compare = app.add_subcommand("compare", "summarize benchmark outputs");
  compare->add_option("--out", out, "directory written by bench")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen(config, out);
    if (*solve) return cmd_solve(method, data, config);
    if (*bench) return cmd_bench(config, out);
    return cmd_compare(out);
  } catch (const Error& e) {
    std::cerr << "ddlqr: " << e.what() << '\n';
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "ddlqr: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "ddlqr: " << e.what() << '\n';
    return kSolverFailure;
  }
}
