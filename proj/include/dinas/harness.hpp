#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dinas/baselines.hpp"
#include "dinas/centralized.hpp"
#include "dinas/continuation.hpp"
#include "dinas/dinas.hpp"

namespace dinas {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kSummarySchemaVersion = 1;

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNonConvergence = 3, kExitInternal = 4 };

struct ProblemSpec {
  std::string family = "logistic";  // logistic | quadratic | csv
  long n = 20;
  long m = 200;
  int nodes = 5;
  double rho = 0.0;  // 0: 0.01 m
  double lambda_min = 0.1;
  double lambda_max = 10.0;
  std::string csv_path;
  std::uint64_t seed = 1;
  bool operator==(const ProblemSpec&) const = default;
};

struct TopologySpec {
  std::string kind = "geometric";  // geometric | edges
  double radius = 0.0;             // 0: sqrt(ln N / N)
  std::uint64_t seed = 1;
  std::vector<std::pair<int, int>> edges;
  bool operator==(const TopologySpec&) const = default;
};

struct MethodSpec {
  std::string name = "dinas";  // dinas | sdinas | dinasc | dg | extra | diging
  double beta = 0.1;
  double gamma0 = 1.0;
  double q = 0.5;
  double eta = 0.9;
  double delta = 0.0;
  std::string solver = "jor";  // jor | damped | dense
  std::string omega_policy = "row_sum";  // row_sum | safe_bound | fixed
  double omega = 1.0;
  double omega_safety = 0.95;
  double tol = 1e-5;
  int max_outer = 1000;
  long max_inner = 100000;
  bool warm_start = true;
  int rejection_cap = 200;
  double theta = 0.1;
  double eps0 = 0.0;  // 0: 0.01 beta
  int max_stages = 8;
  double target_error = 1e-4;
  double step_size = 0.0;  // 0: step_scale (1 + lambda_min(W)) / M
  double step_scale = 0.5;
  int max_iters = 100000;
  bool fixed_step = false;
  bool operator==(const MethodSpec&) const = default;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string name = "experiment";
  ProblemSpec problem;
  TopologySpec topology;
  MethodSpec method;
  double r = 0.1;
  std::string output_dir;
  bool operator==(const ExperimentConfig&) const = default;
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

using nlohmann::json;

/// Reads fields of one JSON object, rejecting unknown keys and wrong types.
class FieldReader {
 public:
  FieldReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end()) return;
    const std::string field = path_.empty() ? key : path_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(field + ": expected true or false");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError(field + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned())
          throw ConfigError(field + ": expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError(field + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(field + ": expected a string");
    }
    out = it->template get<T>();
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError((path_.empty() ? "" : path_ + ".") + it.key() + ": unknown field");
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace detail

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json edges = nlohmann::json::array();
  for (auto [a, b] : c.topology.edges) edges.push_back({a, b});
  const auto& p = c.problem;
  const auto& m = c.method;
  return {
      {"schema_version", c.schema_version},
      {"name", c.name},
      {"problem",
       {{"family", p.family}, {"n", p.n}, {"m", p.m}, {"nodes", p.nodes}, {"rho", p.rho},
        {"lambda_min", p.lambda_min}, {"lambda_max", p.lambda_max}, {"csv_path", p.csv_path}, {"seed", p.seed}}},
      {"topology", {{"kind", c.topology.kind}, {"radius", c.topology.radius}, {"seed", c.topology.seed}, {"edges", edges}}},
      {"method",
       {{"name", m.name}, {"beta", m.beta}, {"gamma0", m.gamma0}, {"q", m.q}, {"eta", m.eta}, {"delta", m.delta},
        {"solver", m.solver}, {"omega_policy", m.omega_policy}, {"omega", m.omega}, {"omega_safety", m.omega_safety},
        {"tol", m.tol}, {"max_outer", m.max_outer}, {"max_inner", m.max_inner}, {"warm_start", m.warm_start},
        {"rejection_cap", m.rejection_cap}, {"theta", m.theta}, {"eps0", m.eps0}, {"max_stages", m.max_stages},
        {"target_error", m.target_error}, {"step_size", m.step_size}, {"step_scale", m.step_scale},
        {"max_iters", m.max_iters}, {"fixed_step", m.fixed_step}}},
      {"cost", {{"r", c.r}}},
      {"output", {{"dir", c.output_dir}}},
  };
}

/// Field-level validation; throws ConfigError naming the field.
inline void validate(const ExperimentConfig& c) {
  using detail::require;
  require(c.schema_version == kConfigSchemaVersion,
          "schema_version: unsupported version " + std::to_string(c.schema_version));
  const auto& p = c.problem;
  require(p.family == "logistic" || p.family == "quadratic" || p.family == "csv",
          "problem.family: expected logistic, quadratic or csv");
  require(p.nodes >= 1, "problem.nodes: must be >= 1");
  if (p.family != "csv") require(p.n >= 1, "problem.n: must be >= 1");
  if (p.family == "logistic") {
    require(p.m >= 1, "problem.m: must be >= 1");
    require(p.m % p.nodes == 0, "problem.m: " + std::to_string(p.m) + " points are not divisible among " +
                                     std::to_string(p.nodes) + " nodes");
  }
  require(p.rho >= 0.0, "problem.rho: must be >= 0");
  if (p.family == "quadratic")
    require(p.lambda_min > 0.0 && p.lambda_max >= p.lambda_min, "problem.lambda_min/lambda_max: need 0 < min <= max");
  if (p.family == "csv") require(!p.csv_path.empty(), "problem.csv_path: required for the csv family");

  const auto& t = c.topology;
  require(t.kind == "geometric" || t.kind == "edges", "topology.kind: expected geometric or edges");
  require(t.radius >= 0.0, "topology.radius: must be >= 0");
  if (t.kind == "edges")
    for (auto [a, b] : t.edges)
      require(a >= 0 && b >= 0 && a < p.nodes && b < p.nodes && a != b,
              "topology.edges: invalid edge (" + std::to_string(a) + ", " + std::to_string(b) + ")");

  const auto& m = c.method;
  static const std::set<std::string> methods{"dinas", "sdinas", "dinasc", "dg", "extra", "diging"};
  require(methods.count(m.name) == 1, "method.name: expected one of dinas, sdinas, dinasc, dg, extra, diging");
  require(m.beta > 0.0, "method.beta: must be > 0");
  require(m.gamma0 > 0.0, "method.gamma0: must be > 0");
  require(m.q > 0.0 && m.q < 1.0, "method.q: must lie in (0, 1)");
  require(m.eta >= 0.0 && m.eta < 1.0, "method.eta: must lie in [0, 1)");
  require(m.delta >= 0.0, "method.delta: must be >= 0");
  require(m.solver == "jor" || m.solver == "damped" || m.solver == "dense",
          "method.solver: expected jor, damped or dense");
  require(m.omega_policy == "row_sum" || m.omega_policy == "safe_bound" || m.omega_policy == "fixed",
          "method.omega_policy: expected row_sum, safe_bound or fixed");
  require(m.omega > 0.0, "method.omega: must be > 0");
  require(m.omega_safety > 0.0 && m.omega_safety <= 1.0, "method.omega_safety: must lie in (0, 1]");
  require(m.tol > 0.0, "method.tol: must be > 0");
  require(m.max_outer >= 0, "method.max_outer: must be >= 0");
  require(m.max_inner >= 1, "method.max_inner: must be >= 1");
  require(m.rejection_cap >= 0, "method.rejection_cap: must be >= 0");
  require(m.theta > 0.0 && m.theta < 1.0, "method.theta: must lie in (0, 1)");
  require(m.eps0 >= 0.0, "method.eps0: must be >= 0");
  require(m.max_stages >= 1, "method.max_stages: must be >= 1");
  require(m.target_error >= 0.0, "method.target_error: must be >= 0");
  require(m.step_size >= 0.0, "method.step_size: must be >= 0");
  require(m.step_scale > 0.0, "method.step_scale: must be > 0");
  require(m.max_iters >= 0, "method.max_iters: must be >= 0");
  require(c.r >= 0.0, "cost.r: must be >= 0");
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  detail::FieldReader root(j, "");
  root.get("schema_version", c.schema_version);
  root.get("name", c.name);
  if (const auto* pj = root.child("problem")) {
    detail::FieldReader r(*pj, "problem");
    auto& p = c.problem;
    r.get("family", p.family);
    r.get("n", p.n);
    r.get("m", p.m);
    r.get("nodes", p.nodes);
    r.get("rho", p.rho);
    r.get("lambda_min", p.lambda_min);
    r.get("lambda_max", p.lambda_max);
    r.get("csv_path", p.csv_path);
    r.get("seed", p.seed);
    r.finish();
  }
  if (const auto* tj = root.child("topology")) {
    detail::FieldReader r(*tj, "topology");
    auto& t = c.topology;
    r.get("kind", t.kind);
    r.get("radius", t.radius);
    r.get("seed", t.seed);
    if (const auto* ej = r.child("edges")) {
      if (!ej->is_array()) throw ConfigError("topology.edges: expected an array of [i, j] pairs");
      for (const auto& e : *ej) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
          throw ConfigError("topology.edges: expected an array of [i, j] pairs");
        t.edges.emplace_back(e[0].get<int>(), e[1].get<int>());
      }
    }
    r.finish();
  }
  if (const auto* mj = root.child("method")) {
    detail::FieldReader r(*mj, "method");
    auto& m = c.method;
    r.get("name", m.name);
    r.get("beta", m.beta);
    r.get("gamma0", m.gamma0);
    r.get("q", m.q);
    r.get("eta", m.eta);
    r.get("delta", m.delta);
    r.get("solver", m.solver);
    r.get("omega_policy", m.omega_policy);
    r.get("omega", m.omega);
    r.get("omega_safety", m.omega_safety);
    r.get("tol", m.tol);
    r.get("max_outer", m.max_outer);
    r.get("max_inner", m.max_inner);
    r.get("warm_start", m.warm_start);
    r.get("rejection_cap", m.rejection_cap);
    r.get("theta", m.theta);
    r.get("eps0", m.eps0);
    r.get("max_stages", m.max_stages);
    r.get("target_error", m.target_error);
    r.get("step_size", m.step_size);
    r.get("step_scale", m.step_scale);
    r.get("max_iters", m.max_iters);
    r.get("fixed_step", m.fixed_step);
    r.finish();
  }
  if (const auto* cj = root.child("cost")) {
    detail::FieldReader r(*cj, "cost");
    r.get("r", c.r);
    r.finish();
  }
  if (const auto* oj = root.child("output")) {
    detail::FieldReader r(*oj, "output");
    r.get("dir", c.output_dir);
    r.finish();
  }
  root.finish();
  validate(c);
  return c;
}

/// Parses config text. Syntax errors report line and column.
inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + e.what());
  }
  return config_from_json(j);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline std::string dump_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Output

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes to a sibling temporary file and renames it over the target.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string iterations_csv(const RunResult& run) {
  std::string s = "k,grad_inf,eta_k,alpha_k,gamma_k,inner_iters,rejections,condition,scalar_ops_cum,scalars_sent_cum\n";
  for (const auto& r : run.records) {
    s += std::to_string(r.k) + "," + format_double(r.grad_inf) + "," + format_double(r.eta_k) + "," +
         format_double(r.alpha_k) + "," + format_double(r.gamma_k) + "," + std::to_string(r.inner_iterations) + "," +
         std::to_string(r.rejections) + "," + to_string(r.condition) + "," + std::to_string(r.ledger.scalar_ops) +
         "," + std::to_string(r.ledger.scalars_sent) + "\n";
  }
  return s;
}

/// log10 of the gradient measure and of e against iteration and total cost.
/// Row 0 is the starting point at zero cost.
inline std::string plot_csv(const RunResult& run, double r, std::optional<double> initial_error) {
  auto lg = [](double v) { return v > 0.0 ? std::log10(v) : -std::numeric_limits<double>::infinity(); };
  std::string s = "iteration,total_cost,log10_grad_inf,log10_consensus_error\n";
  s += "0,0," + format_double(lg(run.initial_grad_inf)) + "," +
       format_double(initial_error ? lg(*initial_error) : std::numeric_limits<double>::quiet_NaN()) + "\n";
  for (std::size_t i = 0; i < run.records.size(); ++i) {
    const auto& rec = run.records[i];
    const double e = std::isnan(rec.consensus_error) ? rec.consensus_error : lg(rec.consensus_error);
    s += std::to_string(i + 1) + "," + format_double(total_cost(rec.ledger, r)) + "," +
         format_double(lg(rec.next_grad_inf)) + "," + format_double(e) + "\n";
  }
  return s;
}

inline std::string stages_csv(const StagedRunResult& res, double r) {
  std::string s = "stage,beta,eps,outer_iters,final_grad_inf,consensus_error,scalar_ops_cum,scalars_sent_cum,total_cost_cum\n";
  for (const auto& st : res.stages) {
    s += std::to_string(st.stage) + "," + format_double(st.beta) + "," + format_double(st.eps) + "," +
         std::to_string(st.outer_iters) + "," + format_double(st.final_grad_inf) + "," +
         format_double(st.consensus_error) + "," + std::to_string(st.ledger.scalar_ops) + "," +
         std::to_string(st.ledger.scalars_sent) + "," + format_double(total_cost(st.ledger, r)) + "\n";
  }
  return s;
}

// ---------------------------------------------------------------------------
// Experiment assembly and dispatch

struct Experiment {
  CostList costs;
  ConsensusMatrix consensus;
  StackedPoint x0;
};

inline CostList build_costs(const ProblemSpec& p) {
  if (p.family == "logistic") {
    const Dataset ds = generate_logistic_dataset(p.n, p.m, p.seed);
    return partition_logistic(ds, p.nodes, p.rho > 0.0 ? p.rho : -1.0);
  }
  if (p.family == "quadratic") return generate_quadratic_family(p.n, p.nodes, p.lambda_min, p.lambda_max, p.seed);
  const Dataset ds = load_csv_dataset(p.csv_path);
  return partition_logistic(ds, p.nodes, p.rho > 0.0 ? p.rho : -1.0);
}

inline Topology build_topology(const TopologySpec& t, int nodes) {
  if (t.kind == "edges") return Topology(nodes, t.edges);
  return random_geometric_graph(nodes, t.radius > 0.0 ? t.radius : default_radius(nodes), t.seed);
}

/// Builds costs, topology and x0 = 0. Data and topology errors surface as ConfigError.
inline Experiment build_experiment(const ExperimentConfig& c) {
  try {
    Experiment e{build_costs(c.problem), metropolis_weights(build_topology(c.topology, c.problem.nodes)), {}};
    e.x0 = StackedPoint(c.problem.nodes, e.costs.front()->dimension());
    return e;
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& err) {
    throw ConfigError(err.what());
  }
}

inline SolverConfig solver_config(const MethodSpec& m) {
  SolverConfig s;
  s.mode = m.solver == "jor" ? SolverMode::Jor : m.solver == "damped" ? SolverMode::DampedBlock : SolverMode::DenseOracle;
  s.omega_policy = m.omega_policy == "row_sum"      ? OmegaPolicy::RowSum
                   : m.omega_policy == "safe_bound" ? OmegaPolicy::SafeBound
                                                    : OmegaPolicy::Fixed;
  s.omega = m.omega;
  s.omega_safety = m.omega_safety;
  s.max_inner_iters = m.max_inner;
  return s;
}

inline DinasOptions dinas_options(const MethodSpec& m) {
  DinasOptions o;
  o.schedule = {m.eta, m.delta};
  o.gamma0 = m.gamma0;
  o.q = m.q;
  o.solver = solver_config(m);
  o.tol = m.tol;
  o.max_outer = m.max_outer;
  o.warm_start = m.warm_start;
  o.rejection_cap = m.rejection_cap;
  return o;
}

inline ProblemConstants experiment_constants(const CostList& costs, const Vector& y_star, std::uint64_t seed) {
  return estimate_constants(costs, box_around({Vector::Zero(y_star.size()), y_star}, 1.0), 50, seed);
}

struct ExperimentOutcome {
  int exit_code = kExitOk;
  nlohmann::json summary;
};

/// Runs one configured experiment and writes iterations.csv, plot.csv,
/// stages.csv (continuation only) and summary.json into `out_dir`.
inline ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const Experiment ex = build_experiment(cfg);
  const MethodSpec& m = cfg.method;

  ExperimentOutcome outcome;
  nlohmann::json& sum = outcome.summary;
  sum["schema_version"] = kSummarySchemaVersion;
  sum["name"] = cfg.name;
  sum["method"] = m.name;
  sum["r"] = cfg.r;

  RunResult run;
  std::optional<StagedRunResult> staged;
  std::optional<Vector> y_star;
  std::string status;
  std::string error;
  try {
    if (m.name != "dinas") y_star = reference_solution(ex.costs);
    if (y_star && !(y_star->squaredNorm() > 0.0)) y_star.reset();
    if (m.name == "dinas") {
      run = dinas_run(PenaltyProblem(ex.costs, m.beta, ex.consensus), ex.x0, dinas_options(m));
    } else if (m.name == "sdinas") {
      SdinasOptions o;
      o.schedule = {m.beta, m.eps0 > 0.0 ? m.eps0 : 0.01 * m.beta, m.theta, m.max_stages};
      o.dinas = dinas_options(m);
      o.y_star = y_star;
      o.target_error = y_star ? m.target_error : 0.0;
      staged = sdinas_run(ex.costs, ex.consensus, ex.x0, o);
      run = staged->combined;
    } else if (m.name == "dinasc") {
      CentralizedProblem cp{std::make_shared<SumCost>(ex.costs), {}};
      if (m.fixed_step) cp.constants = experiment_constants(ex.costs, *y_star, cfg.problem.seed);
      DinascOptions o;
      o.schedule = {m.eta, m.delta};
      o.gamma0 = m.gamma0;
      o.q = m.q;
      o.tol = m.tol;
      o.max_outer = m.max_outer;
      o.warm_start = m.warm_start;
      o.rejection_cap = m.rejection_cap;
      o.fixed_step = m.fixed_step;
      const LinearSolver solver = m.solver == "dense" ? dense_direct_solver() : block_solver(solver_config(m));
      run = dinasc_run(cp, Vector::Zero(ex.x0.dim()), o, solver);
    } else {
      BaselineConfig b;
      b.method = m.name == "dg" ? BaselineMethod::DG : m.name == "extra" ? BaselineMethod::Extra : BaselineMethod::DIGing;
      b.step_scale = m.step_scale;
      b.max_iters = m.max_iters;
      b.tol_error = m.target_error;
      b.tol_grad = m.tol;
      double step = m.step_size;
      if (step <= 0.0) {
        const Vector ref = y_star ? *y_star : Vector::Zero(ex.x0.dim());
        step = default_baseline_step(ex.consensus, experiment_constants(ex.costs, ref, cfg.problem.seed).big_m,
                                     m.step_scale);
      }
      sum["step_size"] = step;
      run = baseline_run(ex.costs, ex.consensus, ex.x0, b, step, y_star);
    }
    status = run.diverged ? "diverged" : run.converged ? "converged" : "not_converged";
  } catch (const NonConvergence& e) {
    status = "not_converged";
    error = e.what();
  } catch (const Error& e) {
    status = "error";
    error = e.what();
  }

  const auto wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  sum["status"] = status;
  sum["converged"] = status == "converged";
  sum["iterations"] = run.records.size();
  sum["initial_grad_inf"] = num(run.initial_grad_inf);
  sum["final_grad_inf"] = num(run.final_grad_inf);
  sum["scalar_ops"] = run.ledger.scalar_ops;
  sum["scalars_sent"] = run.ledger.scalars_sent;
  sum["total_cost"] = num(total_cost(run.ledger, cfg.r));
  sum["gamma_reductions"] = run.gamma_reductions;
  if (y_star && run.x.nodes() > 0) sum["final_consensus_error"] = num(consensus_error(run.x, *y_star));
  if (staged) sum["stages"] = staged->stages.size();
  sum["wall_time_seconds"] = wall;
  if (!error.empty()) sum["error"] = error;

  std::optional<double> e0;
  if (y_star && m.name != "dinasc") e0 = consensus_error(ex.x0, *y_star);
  write_file_atomic(out_dir / "iterations.csv", iterations_csv(run));
  write_file_atomic(out_dir / "plot.csv", plot_csv(run, cfg.r, e0));
  if (staged) write_file_atomic(out_dir / "stages.csv", stages_csv(*staged, cfg.r));
  write_file_atomic(out_dir / "summary.json", sum.dump(2) + "\n");

  outcome.exit_code = status == "converged" ? kExitOk : status == "error" ? kExitInternal : kExitNonConvergence;
  return outcome;
}

/// Config files (*.json) of a directory in lexicographic order.
inline std::vector<std::filesystem::path> list_configs(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

struct ReportRow {
  std::string dir;
  nlohmann::json summary;
};

/// Every summary.json below `results`, sorted by directory.
inline std::vector<ReportRow> collect_summaries(const std::filesystem::path& results) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(results)) throw ConfigError("not a directory: " + results.string());
  std::vector<ReportRow> rows;
  for (const auto& e : fs::recursive_directory_iterator(results)) {
    if (!e.is_regular_file() || e.path().filename() != "summary.json") continue;
    std::ifstream in(e.path());
    try {
      rows.push_back({fs::relative(e.path().parent_path(), results).string(), nlohmann::json::parse(in)});
    } catch (const nlohmann::json::exception& err) {
      throw ConfigError(e.path().string() + ": " + err.what());
    }
  }
  std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) { return a.dir < b.dir; });
  return rows;
}

inline std::string report_csv(const std::vector<ReportRow>& rows) {
  auto field = [](const nlohmann::json& j, const char* k) -> std::string {
    if (!j.contains(k) || j[k].is_null()) return "";
    const auto& v = j[k];
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) return format_double(v.get<double>());
    return v.dump();
  };
  std::string s = "run,name,method,status,iterations,final_grad_inf,final_consensus_error,total_cost,r,gamma_reductions\n";
  for (const auto& row : rows) {
    const auto& j = row.summary;
    s += row.dir + "," + field(j, "name") + "," + field(j, "method") + "," + field(j, "status") + "," +
         field(j, "iterations") + "," + field(j, "final_grad_inf") + "," + field(j, "final_consensus_error") + "," +
         field(j, "total_cost") + "," + field(j, "r") + "," + field(j, "gamma_reductions") + "\n";
  }
  return s;
}

}  // namespace dinas
