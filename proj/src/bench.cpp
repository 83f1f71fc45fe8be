#include "ddlqr/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>
#include <tuple>

#include "ddlqr/cl.hpp"
#include "ddlqr/error.hpp"
#include "ddlqr/io.hpp"
#include "ddlqr/irl.hpp"
#include "ddlqr/sdp.hpp"

namespace ddlqr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kMaxRedraws = 100;
constexpr int kMaxExcitations = 5;

// Independent stream per (seed, system, purpose, attempt).
std::mt19937_64 stream(const ExperimentConfig& cfg, int index, int purpose, int attempt = 0) {
  std::seed_seq seq{std::uint32_t(cfg.seed), std::uint32_t(cfg.seed >> 32), std::uint32_t(index),
                    std::uint32_t(purpose), std::uint32_t(attempt)};
  return std::mt19937_64(seq);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw Error(ErrorCode::InvalidArgument, "config: " + key + " expects a number");
  return d;
}

long to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) throw Error(ErrorCode::InvalidArgument, "config: " + key + " expects an integer");
  return long(d);
}

Vector weight_spec(const std::string& key, const std::string& v, Eigen::Index n) {
  const auto parts = split(v, ',');
  if (parts.size() == 1) return Vector::Constant(n, to_double(key, parts[0]));
  Vector out(Eigen::Index(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) out(Eigen::Index(i)) = to_double(key, parts[i]);
  return out;
}

const char* code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::DataNotInformative: return "data-not-informative";
    case ErrorCode::NotStabilizing: return "not-stabilizing";
    case ErrorCode::SolverFailure: return "solver-failure";
    case ErrorCode::Numerical: return "numerical";
  }
  return "error";
}

std::int64_t median_ns(std::vector<std::int64_t> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : (v[h - 1] + v[h]) / 2;
}

std::int64_t median_step(const std::vector<std::int64_t>& cumulative) {
  std::vector<std::int64_t> d;
  for (std::size_t i = 1; i < cumulative.size(); ++i) d.push_back(cumulative[i] - cumulative[i - 1]);
  return median_ns(std::move(d));
}

MethodOutput from_pi(const PiHistory& h) {
  MethodOutput out;
  for (std::size_t k = 0; k < h.gains.size(); ++k) out.k_or_t.push_back(double(k));
  out.gains = h.gains;
  out.values = h.values;
  out.wall_ns = h.wall_ns;
  out.unit_ns = median_step(h.wall_ns);
  return out;
}

MethodOutput from_vi(const ViHistory& h, int stride) {
  MethodOutput out;
  const std::size_t last = h.values.size() - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    if (k % std::size_t(stride) != 0 && k != last) continue;
    out.k_or_t.push_back(double(k));
    out.gains.push_back(h.gains[k]);
    out.values.push_back(h.values[k]);
    out.wall_ns.push_back(h.wall_ns[k]);
  }
  out.unit_ns = median_step(h.wall_ns);
  return out;
}

MethodOutput from_flow(const FlowTrajectory& f) {
  MethodOutput out;
  out.k_or_t = f.times;
  out.gains = f.gains;
  out.wall_ns = f.wall_ns;
  out.unit_ns = f.wall_ns.empty() ? 0 : f.wall_ns.back();
  return out;
}

template <typename Solve>
MethodOutput timed_sdp(const ExperimentConfig& cfg, Solve&& solve) {
  const int reps = cfg.record_time ? std::max(1, cfg.timing_reps) : 1;
  std::vector<std::int64_t> times;
  MethodOutput out;
  for (int r = 0; r < reps; ++r) {
    Stopwatch clock;
    auto [k, p, diag] = solve();
    times.push_back(clock.elapsed_ns());
    if (r == 0) {
      out.k_or_t = {0.0};
      out.gains = {k};
      out.values = {p};
      out.diagnostic = diag;
    }
  }
  out.unit_ns = median_ns(times);
  out.wall_ns = {out.unit_ns};
  return out;
}

void zero_clock(MethodOutput& out) {
  std::fill(out.wall_ns.begin(), out.wall_ns.end(), 0);
  out.unit_ns = 0;
}

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * double(sorted.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - double(lo)) * (sorted[hi] - sorted[lo]);
}

std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::InvalidArgument, "cannot create output directory " + dir);
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  return os;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

const std::vector<std::string>& method_ids() {
  static const std::vector<std::string> ids = {
      "pi-cl",      "pi-irl",      "vi-cl",   "vi-irl",  "flow-cl",  "flow-irl", "ricflow-cl",
      "ricflow-irl", "sdp-cl1",    "sdp-cl2", "sdp-cl3", "sdp-irl1", "sdp-irl2"};
  return ids;
}

bool is_method(const std::string& id) {
  const auto& ids = method_ids();
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

bool uses_cl_data(const std::string& id) {
  return id.size() >= 3 && (id.compare(id.size() - 3, 3, "-cl") == 0 ||
                            id.rfind("sdp-cl", 0) == 0);
}

bool needs_initial_gain(const std::string& id) {
  return id.rfind("pi-", 0) == 0 || id.rfind("flow-", 0) == 0;
}

std::vector<std::string> ExperimentConfig::selected_methods() const {
  return methods.empty() ? method_ids() : methods;
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, "config: " + what);
  };
  require(n >= 1 && m >= 1, "n and m must be positive");
  require(num_systems >= 0, "num_systems must be non-negative");
  require(T >= 1 && delta > 0 && hold > 0, "T, delta and hold must be positive");
  const double holds = delta / hold;
  require(std::abs(holds - std::round(holds)) < 1e-9 * holds, "delta must be a multiple of hold");
  require(sparsity >= 0 && sparsity < 1, "sparsity must lie in [0, 1)");
  require(q_diag.size() == n && (q_diag.array() >= 0).all(), "Q needs n non-negative entries");
  require(r_diag.size() == m && (r_diag.array() > 0).all(), "R needs m positive entries");
  require(alpha > 0 && beta > 0, "alpha and beta must be positive");
  require(vi.c > 0 && vi.p > 0 && vi.radius_slope > 0 && vi.max_iterations >= 1 && vi_stride >= 1,
          "bad VI schedule");
  require(pi.max_iterations >= 1, "pi_iterations must be positive");
  require(flow_horizon > 0 && flow_checkpoint > 0, "flow horizon and checkpoint must be positive");
  require(threads >= 1 && timing_reps >= 1, "threads and timing_reps must be positive");
  for (const auto& id : methods) require(is_method(id), "unknown method '" + id + "'");
}

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "config line " + std::to_string(lineno) + ": expected key = value");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  ExperimentConfig c;
  auto take = [&](const char* key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  if (auto v = take("n")) c.n = to_int("n", *v);
  if (auto v = take("m")) c.m = to_int("m", *v);
  c.q_diag = Vector::Ones(c.n);
  c.r_diag = Vector::Ones(c.m);
  if (auto v = take("Q")) c.q_diag = weight_spec("Q", *v, c.n);
  if (auto v = take("R")) c.r_diag = weight_spec("R", *v, c.m);
  if (auto v = take("num_systems")) c.num_systems = int(to_int("num_systems", *v));
  if (auto v = take("T")) c.T = int(to_int("T", *v));
  if (auto v = take("delta")) c.delta = to_double("delta", *v);
  if (auto v = take("hold")) c.hold = to_double("hold", *v);
  if (auto v = take("sparsity")) c.sparsity = to_double("sparsity", *v);
  if (auto v = take("alpha")) c.alpha = to_double("alpha", *v);
  if (auto v = take("beta")) c.beta = to_double("beta", *v);
  if (auto v = take("vi_c")) c.vi.c = to_double("vi_c", *v);
  if (auto v = take("vi_p")) c.vi.p = to_double("vi_p", *v);
  if (auto v = take("vi_radius_slope")) c.vi.radius_slope = to_double("vi_radius_slope", *v);
  if (auto v = take("vi_iterations")) c.vi.max_iterations = int(to_int("vi_iterations", *v));
  if (auto v = take("vi_stride")) c.vi_stride = int(to_int("vi_stride", *v));
  if (auto v = take("pi_iterations")) c.pi.max_iterations = int(to_int("pi_iterations", *v));
  if (auto v = take("pi_tolerance")) c.pi.tolerance = to_double("pi_tolerance", *v);
  if (auto v = take("flow_horizon")) c.flow_horizon = to_double("flow_horizon", *v);
  if (auto v = take("flow_checkpoint")) c.flow_checkpoint = to_double("flow_checkpoint", *v);
  if (auto v = take("seed")) c.seed = std::uint64_t(to_int("seed", *v));
  if (auto v = take("methods")) {
    if (*v != "all") c.methods = split(*v, ',');
  }
  if (auto v = take("output_dir")) c.output_dir = *v;
  if (auto v = take("threads")) c.threads = int(to_int("threads", *v));
  if (auto v = take("timing_reps")) c.timing_reps = int(to_int("timing_reps", *v));
  if (auto v = take("record_time")) {
    if (*v != "true" && *v != "false") throw Error(ErrorCode::InvalidArgument, "config: record_time expects true or false");
    c.record_time = *v == "true";
  }
  if (!kv.empty()) throw Error(ErrorCode::InvalidArgument, "config: unknown key '" + kv.begin()->first + "'");
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::InvalidArgument, "cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Plants and data
// ---------------------------------------------------------------------------

LinearSystem random_system(const ExperimentConfig& cfg, int index) {
  auto rng = stream(cfg, index, 0);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution zero(cfg.sparsity);
  auto draw = [&](Eigen::Index r, Eigen::Index c) {
    Matrix out(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
      for (Eigen::Index i = 0; i < r; ++i) {
        const bool z = zero(rng);
        const double v = normal(rng);
        out(i, j) = z ? 0.0 : v;
      }
    return out;
  };
  for (int attempt = 0; attempt <= kMaxRedraws; ++attempt) {
    LinearSystem sys{draw(cfg.n, cfg.n), draw(cfg.n, cfg.m), cfg.Q(), cfg.R()};
    if (satisfies_standing_assumption(sys)) return sys;
  }
  throw Error(ErrorCode::InvalidArgument,
              "random_system: no stabilizable draw after " + std::to_string(kMaxRedraws) + " redraws");
}

Experiment prepare_experiment(const ExperimentConfig& cfg, int index) {
  Experiment ex;
  ex.index = index;
  ex.sys = random_system(cfg, index);
  ex.care = care_solve(ex.sys);
  ex.K0 = stabilizing_gain_search(ex.sys, stream(cfg, index, 1)());
  const auto sched = SampleSchedule::consecutive(cfg.T, cfg.delta);
  for (int attempt = 0; attempt < kMaxExcitations; ++attempt) {
    ex.attempts = attempt + 1;
    auto rng = stream(cfg, index, 2, attempt);
    std::normal_distribution<double> normal;
    Vector x0(cfg.n);
    for (Eigen::Index i = 0; i < cfg.n; ++i) x0(i) = normal(rng);
    ExcitationConfig exc;
    exc.hold_interval = cfg.hold;
    exc.seed = rng();
    ex.traj = simulate_zoh(ex.sys, x0, exc, double(cfg.T) * cfg.delta);
    try {
      ex.cl.emplace(collect_cl_data(ex.traj, sched));
      ex.irl.emplace(collect_irl_data(ex.traj, sched));
      return ex;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DataNotInformative) throw;
      ex.cl.reset();
      ex.irl.reset();
    }
  }
  throw Error(ErrorCode::DataNotInformative,
              "system " + std::to_string(index) + ": data not informative after " +
                  std::to_string(kMaxExcitations) + " excitation draws");
}

// ---------------------------------------------------------------------------
// Method dispatch
// ---------------------------------------------------------------------------

MethodOutput run_method(const std::string& id, const CLData* cl, const IRLData* irl,
                        const Weights& w, const Matrix& k0, const ExperimentConfig& cfg) {
  if (!is_method(id)) throw Error(ErrorCode::InvalidArgument, "unknown method '" + id + "'");
  if (uses_cl_data(id) ? cl == nullptr : irl == nullptr) {
    throw Error(ErrorCode::InvalidArgument, id + ": required data set missing");
  }
  const Eigen::Index n = w.Q.rows();
  FlowConfig fc;
  fc.horizon = cfg.flow_horizon;
  fc.checkpoint = cfg.flow_checkpoint;
  const Matrix zero = Matrix::Zero(n, n);

  MethodOutput out;
  if (id == "pi-cl") {
    out = from_pi(policy_iteration(*cl, w, particular_solution(*cl, k0), cfg.pi));
  } else if (id == "pi-irl") {
    out = from_pi(policy_iteration_irl(*irl, w, k0, cfg.pi));
  } else if (id == "vi-cl") {
    out = from_vi(value_iteration_cl(*cl, w, zero, cfg.vi), cfg.vi_stride);
  } else if (id == "vi-irl") {
    out = from_vi(value_iteration_irl(*irl, w, zero, cfg.vi), cfg.vi_stride);
  } else if (id == "ricflow-cl") {
    const FlowTrajectory f = riccati_flow_cl(*cl, w, zero, fc);
    out = from_flow(f);
    out.values = f.states;
  } else if (id == "ricflow-irl") {
    const FlowTrajectory f = riccati_flow_irl(*irl, w, zero, fc);
    out = from_flow(f);
    out.values = f.states;
  } else if (id == "flow-cl") {
    const FlowTrajectory f = projected_gradient_flow(*cl, w, particular_solution(*cl, k0), cfg.alpha, fc);
    out = from_flow(f);
    for (const Matrix& g : f.states) {
      const CLPolicy pol{g};
      out.diagnostic = std::max(out.diagnostic, feasibility_residual(*cl, pol));
      out.values.push_back(policy_evaluation(*cl, w, pol).P);
    }
  } else if (id == "flow-irl") {
    const FlowTrajectory f = gradient_flow_irl(*irl, w, k0, cfg.beta, fc);
    out = from_flow(f);
    for (const Matrix& k : f.gains) out.values.push_back(policy_evaluation_irl(*irl, w, k).P);
  } else if (id == "sdp-cl1") {
    out = timed_sdp(cfg, [&] {
      const Cl1Result r = solve_cl1(*cl, w);
      return std::tuple{r.K, policy_evaluation(*cl, w, CLPolicy{r.G}).P, 0.0};
    });
  } else if (id == "sdp-cl2") {
    out = timed_sdp(cfg, [&] {
      const Cl2Result r = solve_cl2(*cl, w);
      return std::tuple{r.K, r.P, 0.0};
    });
  } else if (id == "sdp-cl3") {
    out = timed_sdp(cfg, [&] {
      const Cl3Result r = solve_cl3(*cl, w);
      return std::tuple{r.K, r.P, 0.0};
    });
  } else if (id == "sdp-irl1") {
    out = timed_sdp(cfg, [&] {
      const Irl1Result r = solve_irl1(*irl, w);
      return std::tuple{r.K, r.P, r.slack};
    });
  } else {
    out = timed_sdp(cfg, [&] {
      const Irl2Result r = solve_irl2(*irl, w);
      return std::tuple{r.K, r.P, 0.0};
    });
  }
  if (!cfg.record_time) zero_clock(out);
  return out;
}

// ---------------------------------------------------------------------------
// Scoring and statistics
// ---------------------------------------------------------------------------

double RunRecord::final_K() const { return residual_K.empty() ? kNaN : residual_K.back(); }
// PI never evaluates its last gain, so the last value estimate may sit one
// entry earlier.
double RunRecord::final_P() const {
  for (auto it = residual_P.rbegin(); it != residual_P.rend(); ++it)
    if (!std::isnan(*it)) return *it;
  return kNaN;
}

RunRecord score(const Experiment& ex, const std::string& method, MethodOutput out) {
  RunRecord rec;
  rec.system_id = ex.index;
  rec.method = method;
  const Matrix& ks = ex.care.Kstar;
  const Matrix& ps = ex.care.Pstar;
  double denom = 1.0;
  if (method.rfind("sdp-", 0) != 0 && !out.gains.empty()) {
    const double d0 = (out.gains.front() - ks).norm();
    if (d0 > 0) denom = d0;
  }
  rec.max_abscissa = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.gains.size(); ++i) {
    rec.residual_K.push_back((out.gains[i] - ks).norm() / denom);
    const Matrix& p = i < out.values.size() ? out.values[i] : Matrix();
    rec.residual_P.push_back(p.size() ? (p - ps).norm() / ps.norm() : kNaN);
    rec.max_abscissa = std::max(
        rec.max_abscissa, spectral(Matrix(ex.sys.A - ex.sys.B * out.gains[i])).abscissa);
  }
  rec.k_or_t = std::move(out.k_or_t);
  rec.wall_ns = std::move(out.wall_ns);
  rec.gains = std::move(out.gains);
  rec.values = std::move(out.values);
  rec.unit_ns = out.unit_ns;
  rec.total_ns = rec.wall_ns.empty() ? 0 : rec.wall_ns.back();
  rec.diagnostic = out.diagnostic;
  return rec;
}

Stats describe(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
               values.end());
  Stats s;
  s.count = int(values.size());
  if (values.empty()) {
    s.mean = s.median = s.q1 = s.q3 = s.min = s.max = kNaN;
    return s;
  }
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / double(values.size());
  s.median = quantile(values, 0.5);
  s.q1 = quantile(values, 0.25);
  s.q3 = quantile(values, 0.75);
  s.min = values.front();
  s.max = values.back();
  return s;
}

std::vector<MethodSummary> summarize(const std::vector<RunRecord>& records,
                                     const std::vector<std::string>& methods) {
  std::vector<MethodSummary> out;
  for (const auto& id : methods) {
    MethodSummary s;
    s.method = id;
    std::vector<double> k, p, t;
    for (const RunRecord& r : records) {
      if (r.method != id) continue;
      ++s.runs;
      if (!r.ok()) {
        ++s.failures;
        continue;
      }
      k.push_back(r.final_K());
      p.push_back(r.final_P());
      t.push_back(double(r.unit_ns));
    }
    s.final_K = describe(std::move(k));
    s.final_P = describe(std::move(p));
    s.unit_ns = describe(std::move(t));
    out.push_back(std::move(s));
  }
  return out;
}

SuiteResult run_suite(const ExperimentConfig& cfg, const std::function<void(int)>& on_system_done) {
  cfg.validate();
  const auto methods = cfg.selected_methods();
  const Weights w = cfg.weights();
  std::vector<std::vector<RunRecord>> per_system(std::size_t(std::max(0, cfg.num_systems)));
  std::atomic<int> next{0};
  std::mutex done_mutex;

  auto failed = [](int index, const std::string& id, const std::string& status) {
    RunRecord r;
    r.system_id = index;
    r.method = id;
    r.status = status;
    return r;
  };
  auto describe_error = [](const std::exception& e) {
    if (const auto* de = dynamic_cast<const Error*>(&e)) return std::string(code_name(de->code())) + ": " + de->what();
    return std::string("error: ") + e.what();
  };

  auto worker = [&] {
    for (int i = next++; i < cfg.num_systems; i = next++) {
      auto& recs = per_system[std::size_t(i)];
      try {
        const Experiment ex = prepare_experiment(cfg, i);
        for (const auto& id : methods) {
          try {
            const CLData* cl = ex.cl ? &*ex.cl : nullptr;
            const IRLData* irl = ex.irl ? &*ex.irl : nullptr;
            recs.push_back(score(ex, id, run_method(id, cl, irl, w, ex.K0, cfg)));
          } catch (const std::exception& e) {
            recs.push_back(failed(i, id, describe_error(e)));
          }
        }
      } catch (const std::exception& e) {
        for (const auto& id : methods) recs.push_back(failed(i, id, describe_error(e)));
      }
      if (on_system_done) {
        std::lock_guard<std::mutex> lock(done_mutex);
        on_system_done(i);
      }
    }
  };

  const int width = std::min(cfg.threads, std::max(1, cfg.num_systems));
  if (width <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < width; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SuiteResult out;
  for (auto& recs : per_system)
    for (auto& r : recs) out.records.push_back(std::move(r));
  out.summary = summarize(out.records, methods);
  return out;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

void write_series_csv(const std::string& path, const std::vector<const RunRecord*>& runs) {
  std::ofstream os = open_out(path);
  os << "system_id,k_or_t,residual_K,residual_P,wall_ns\n";
  for (const RunRecord* r : runs) {
    for (std::size_t i = 0; i < r->k_or_t.size(); ++i) {
      os << r->system_id << ',' << format_double(r->k_or_t[i]) << ','
         << format_double(r->residual_K[i]) << ',' << format_double(r->residual_P[i]) << ','
         << r->wall_ns[i] << '\n';
    }
  }
  if (!os) throw Error(ErrorCode::InvalidArgument, "write failed: " + path);
}

void write_series_svg(const std::string& path, const std::string& title,
                      const std::vector<const RunRecord*>& runs) {
  const double width = 640, height = 400, left = 70, right = 20, top = 36, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;
  constexpr double kFloor = 1e-16;

  // Single-point series (the convex programs) are plotted against the system id.
  bool single = !runs.empty();
  for (const RunRecord* r : runs) single = single && r->k_or_t.size() <= 1;
  std::vector<std::vector<std::pair<double, double>>> lines;
  if (single) {
    std::vector<std::pair<double, double>> pts;
    for (const RunRecord* r : runs)
      if (!r->residual_K.empty()) pts.emplace_back(double(r->system_id), r->residual_K.front());
    lines.push_back(std::move(pts));
  } else {
    for (const RunRecord* r : runs) {
      std::vector<std::pair<double, double>> pts;
      for (std::size_t i = 0; i < r->k_or_t.size(); ++i) pts.emplace_back(r->k_or_t[i], r->residual_K[i]);
      lines.push_back(std::move(pts));
    }
  }

  // Mean over the runs that reach each index.
  std::vector<std::pair<double, double>> mean;
  if (single) {
    double sum = 0;
    for (const auto& [x, y] : lines.front()) sum += y;
    if (!lines.front().empty()) {
      const double avg = sum / double(lines.front().size());
      mean = {{lines.front().front().first, avg}, {lines.front().back().first, avg}};
    }
  } else {
    std::size_t longest = 0;
    for (const auto& l : lines) longest = std::max(longest, l.size());
    for (std::size_t i = 0; i < longest; ++i) {
      double sum = 0, x = 0;
      int cnt = 0;
      for (const auto& l : lines) {
        if (i < l.size() && std::isfinite(l[i].second)) {
          sum += l[i].second;
          x = l[i].first;
          ++cnt;
        }
      }
      if (cnt) mean.emplace_back(x, sum / cnt);
    }
  }

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& l : lines)
    for (const auto& [x, y] : l) {
      if (!std::isfinite(y)) continue;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      const double yy = std::max(y, kFloor);
      ymin = std::min(ymin, yy);
      ymax = std::max(ymax, yy);
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 1e-3, ymax = 1;
  if (xmax <= xmin) xmax = xmin + 1;
  double lo = std::floor(std::log10(ymin)), hi = std::ceil(std::log10(ymax));
  if (hi <= lo) hi = lo + 1;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) {
    const double ly = std::log10(std::max(y, kFloor));
    return top + (hi - ly) / (hi - lo) * ph;
  };
  auto polyline = [&](const std::vector<std::pair<double, double>>& pts) {
    std::string s;
    for (const auto& [x, y] : pts) {
      if (!std::isfinite(y)) continue;
      s += fmt("%.2f", px(x)) + "," + fmt("%.2f", py(y)) + " ";
    }
    return s;
  };

  std::ofstream os = open_out(path);
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title
     << "</text>\n";
  for (int e = int(lo); e <= int(hi); ++e) {
    const double y = py(std::pow(10.0, e));
    os << "<line x1=\"" << left << "\" y1=\"" << fmt("%.2f", y) << "\" x2=\"" << left + pw << "\" y2=\""
       << fmt("%.2f", y) << "\" stroke=\"#e0e0e0\"/>\n"
       << "<text x=\"" << left - 6 << "\" y=\"" << fmt("%.2f", y + 4)
       << "\" text-anchor=\"end\">1e" << e << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const double x = xmin + (xmax - xmin) * i / 4.0;
    os << "<text x=\"" << fmt("%.2f", px(x)) << "\" y=\"" << top + ph + 16
       << "\" text-anchor=\"middle\">" << fmt("%g", x) << "</text>\n";
  }
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n"
     << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">"
     << (single ? "system" : "k or t") << "</text>\n"
     << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << top + ph / 2 << ")\">residual</text>\n";
  for (const auto& l : lines) {
    os << "<polyline fill=\"none\" stroke=\"#9ecae1\" stroke-opacity=\"0.6\" stroke-width=\"1\" points=\""
       << polyline(l) << "\"/>\n";
  }
  if (!mean.empty()) {
    os << "<polyline fill=\"none\" stroke=\"#08306b\" stroke-width=\"2\" points=\"" << polyline(mean)
       << "\"/>\n";
  }
  os << "</svg>\n";
  if (!os) throw Error(ErrorCode::InvalidArgument, "write failed: " + path);
}

void emit(const std::string& dir, const SuiteResult& result) {
  ensure_dir(dir);
  const auto sep = std::string("/");
  std::vector<std::string> methods;
  for (const auto& s : result.summary) methods.push_back(s.method);

  for (const auto& id : methods) {
    std::vector<const RunRecord*> runs;
    for (const RunRecord& r : result.records)
      if (r.method == id && r.ok()) runs.push_back(&r);
    write_series_csv(dir + sep + id + ".csv", runs);
    write_series_svg(dir + sep + id + ".svg", id, runs);
  }

  {
    std::ofstream os = open_out(dir + sep + "runs.csv");
    os << "system_id,method,status,final_residual_K,final_residual_P,diagnostic,max_abscissa,unit_ns,total_ns\n";
    for (const RunRecord& r : result.records) {
      os << r.system_id << ',' << r.method << ',' << csv_safe(r.status) << ','
         << format_double(r.final_K()) << ',' << format_double(r.final_P()) << ','
         << format_double(r.diagnostic) << ',' << format_double(r.ok() ? r.max_abscissa : kNaN) << ','
         << r.unit_ns << ',' << r.total_ns << '\n';
    }
  }
  {
    std::ofstream os = open_out(dir + sep + "summary.csv");
    os << "method,runs,failures,mean_K,median_K,q1_K,q3_K,min_K,max_K,mean_P,median_P\n";
    for (const auto& s : result.summary) {
      os << s.method << ',' << s.runs << ',' << s.failures << ',' << format_double(s.final_K.mean) << ','
         << format_double(s.final_K.median) << ',' << format_double(s.final_K.q1) << ','
         << format_double(s.final_K.q3) << ',' << format_double(s.final_K.min) << ','
         << format_double(s.final_K.max) << ',' << format_double(s.final_P.mean) << ','
         << format_double(s.final_P.median) << '\n';
    }
  }
  {
    std::ofstream os = open_out(dir + sep + "timing.csv");
    os << "method,unit,mean_us,median_us\n";
    for (const auto& s : result.summary) {
      const char* unit = s.method.rfind("sdp-", 0) == 0   ? "solve"
                         : s.method.find("flow") != std::string::npos ? "run"
                                                                       : "iteration";
      os << s.method << ',' << unit << ',' << fmt("%.3f", s.unit_ns.mean / 1e3) << ','
         << fmt("%.3f", s.unit_ns.median / 1e3) << '\n';
    }
  }
}

SeriesFile read_series_csv(const std::string& path, const std::string& method) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::InvalidArgument, "cannot read " + path);
  SeriesFile f;
  f.method = method;
  std::string line;
  std::getline(is, line);
  if (trim(line) != "system_id,k_or_t,residual_K,residual_P,wall_ns") {
    throw Error(ErrorCode::InvalidArgument, path + ": unexpected header");
  }
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 5) throw Error(ErrorCode::InvalidArgument, path + ": bad row");
    const int id = int(to_int("system_id", cells[0]));
    if (f.system_ids.empty() || f.system_ids.back() != id) {
      f.system_ids.push_back(id);
      f.k_or_t.emplace_back();
      f.residual_K.emplace_back();
      f.residual_P.emplace_back();
    }
    f.k_or_t.back().push_back(to_double("k_or_t", cells[1]));
    f.residual_K.back().push_back(to_double("residual_K", cells[2]));
    f.residual_P.back().push_back(to_double("residual_P", cells[3]));
  }
  return f;
}

std::string format_summary(const std::vector<MethodSummary>& summary) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %5s %5s %11s %11s %11s %11s %11s %12s\n", "method", "runs",
                "fail", "mean", "median", "q1", "q3", "max", "median unit");
  out += buf;
  for (const auto& s : summary) {
    std::snprintf(buf, sizeof buf, "%-12s %5d %5d %11.3e %11.3e %11.3e %11.3e %11.3e ",
                  s.method.c_str(), s.runs, s.failures, s.final_K.mean, s.final_K.median,
                  s.final_K.q1, s.final_K.q3, s.final_K.max);
    out += buf;
    if (s.unit_ns.count > 0 && s.unit_ns.median > 0) {
      std::snprintf(buf, sizeof buf, "%9.1f us\n", s.unit_ns.median / 1e3);
      out += buf;
    } else {
      out += "        -\n";
    }
  }
  return out;
}

}  // namespace ddlqr
