#pragma once

// Benchmark harness: random plants, one shared excitation experiment per
// plant, every solver run on the resulting data and scored against the
// model-based oracle. Outputs are CSV series, SVG plots and summary tables.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ddlqr/iterate.hpp"
#include "ddlqr/oracle.hpp"
#include "ddlqr/sim.hpp"
#include "ddlqr/system.hpp"

namespace ddlqr {

struct ExperimentConfig {
  Eigen::Index n = 4;
  Eigen::Index m = 2;
  int num_systems = 100;
  int T = 20;           ///< integration windows
  double delta = 0.1;   ///< window length [s]
  double hold = 0.01;   ///< input hold interval [s]
  double sparsity = 0.5;
  Vector q_diag = Vector::Ones(4);  ///< Q = diag(q_diag)
  Vector r_diag = Vector::Ones(2);
  double alpha = 200.0;  ///< CL projected gradient flow gain
  double beta = 1.5;     ///< IRL gradient flow gain
  ViConfig vi;           ///< c = 40, p = 0.8, slope 5, 5000 iterations
  int vi_stride = 10;    ///< VI iterates written every vi_stride steps
  PiConfig pi;
  double flow_horizon = 10.0;
  double flow_checkpoint = 0.05;
  std::uint64_t seed = 1;
  std::vector<std::string> methods;  ///< empty means all
  std::string output_dir = "out";
  int threads = 1;
  int timing_reps = 5;
  bool record_time = true;  ///< false writes wall_ns = 0 everywhere

  [[nodiscard]] Matrix Q() const { return q_diag.asDiagonal(); }
  [[nodiscard]] Matrix R() const { return r_diag.asDiagonal(); }
  [[nodiscard]] Weights weights() const { return {Q(), R()}; }
  [[nodiscard]] std::vector<std::string> selected_methods() const;
  /// Throws InvalidArgument on inconsistent sizes or unknown methods.
  void validate() const;
};

/// Flat `key = value` text; `#` starts a comment. Unknown keys are errors.
[[nodiscard]] ExperimentConfig parse_config(const std::string& text);
[[nodiscard]] ExperimentConfig load_config(const std::string& path);

/// pi-cl, pi-irl, vi-cl, vi-irl, flow-cl, flow-irl, ricflow-cl, ricflow-irl,
/// sdp-cl1, sdp-cl2, sdp-cl3, sdp-irl1, sdp-irl2.
[[nodiscard]] const std::vector<std::string>& method_ids();
[[nodiscard]] bool is_method(const std::string& id);
[[nodiscard]] bool uses_cl_data(const std::string& id);
/// Methods started from the stabilizing gain K0.
[[nodiscard]] bool needs_initial_gain(const std::string& id);

/// Entries zero with probability `sparsity`, otherwise standard normal;
/// redraws (at most 100 times) until (A, B) passes the PBH test.
[[nodiscard]] LinearSystem random_system(const ExperimentConfig& cfg, int index);

/// Everything the benchmark knows about one plant. The data-driven solvers
/// only ever see `cl`, `irl`, the weights and K0.
struct Experiment {
  int index = 0;
  LinearSystem sys;
  CareSolution care;
  Matrix K0;
  Trajectory traj;
  std::optional<CLData> cl;
  std::optional<IRLData> irl;
  int attempts = 0;  ///< excitation draws used
};

/// Plant, oracle, K0 and one excitation run. The excitation is redrawn (at
/// most 5 seeds) until both data sets are informative, otherwise throws
/// DataNotInformative.
[[nodiscard]] Experiment prepare_experiment(const ExperimentConfig& cfg, int index);

/// Raw output of one solver run: gains and value matrices at the recorded
/// iterations or checkpoints.
struct MethodOutput {
  std::vector<double> k_or_t;
  std::vector<Matrix> gains;
  std::vector<Matrix> values;  ///< empty matrix where no value estimate exists
  std::vector<std::int64_t> wall_ns;
  std::int64_t unit_ns = 0;  ///< median time of one iteration, or of a full solve
  /// flow-cl: max ||X~ G - I||_F over checkpoints; sdp-irl1: exactness slack.
  double diagnostic = 0.0;
};

/// Runs one method on data only. `k0` is ignored by methods that start from P = 0.
[[nodiscard]] MethodOutput run_method(const std::string& id, const CLData* cl,
                                      const IRLData* irl, const Weights& w, const Matrix& k0,
                                      const ExperimentConfig& cfg);

struct RunRecord {
  int system_id = 0;
  std::string method;
  std::vector<double> k_or_t;
  std::vector<double> residual_K;  ///< normalized by ||K_0 - K*|| (SDPs: absolute)
  std::vector<double> residual_P;  ///< ||P - P*|| / ||P*||, NaN where unavailable
  std::vector<std::int64_t> wall_ns;
  std::vector<Matrix> gains, values;
  std::int64_t unit_ns = 0;
  std::int64_t total_ns = 0;
  double diagnostic = 0.0;
  /// Largest spectral abscissa of A - B K over the recorded gains.
  double max_abscissa = 0.0;
  std::string status = "ok";

  [[nodiscard]] bool ok() const { return status == "ok"; }
  [[nodiscard]] double final_K() const;
  [[nodiscard]] double final_P() const;  ///< last available value residual
};

/// Scores a method output against the oracle.
[[nodiscard]] RunRecord score(const Experiment& ex, const std::string& method,
                              MethodOutput out);

struct Stats {
  int count = 0;
  double mean = 0.0, median = 0.0, q1 = 0.0, q3 = 0.0, min = 0.0, max = 0.0;
};
/// NaNs are skipped; quartiles interpolate linearly between order statistics.
[[nodiscard]] Stats describe(std::vector<double> values);

struct MethodSummary {
  std::string method;
  int runs = 0;
  int failures = 0;
  Stats final_K;
  Stats final_P;
  Stats unit_ns;
};

struct SuiteResult {
  std::vector<RunRecord> records;  ///< ordered by (system, method)
  std::vector<MethodSummary> summary;
};

/// Per-run failures are recorded in RunRecord::status; the suite never aborts.
[[nodiscard]] SuiteResult run_suite(const ExperimentConfig& cfg,
                                    const std::function<void(int)>& on_system_done = {});

[[nodiscard]] std::vector<MethodSummary> summarize(const std::vector<RunRecord>& records,
                                                   const std::vector<std::string>& methods);

/// Writes <method>.csv and <method>.svg per method, runs.csv, summary.csv and
/// timing.csv into `dir` (created if missing).
void emit(const std::string& dir, const SuiteResult& result);

void write_series_csv(const std::string& path, const std::vector<const RunRecord*>& runs);

/// Light per-run lines, dark mean line, log-scale y.
void write_series_svg(const std::string& path, const std::string& title,
                      const std::vector<const RunRecord*>& runs);

/// Series read back from a <method>.csv, grouped by system id.
struct SeriesFile {
  std::string method;
  std::vector<int> system_ids;
  std::vector<std::vector<double>> k_or_t, residual_K, residual_P;
};
[[nodiscard]] SeriesFile read_series_csv(const std::string& path, const std::string& method);

/// Human-readable table of summaries.
[[nodiscard]] std::string format_summary(const std::vector<MethodSummary>& summary);

}  // namespace ddlqr
