#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace dinas;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dinas_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(DINAS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig small_logistic(const std::string& method = "dinas") {
  ExperimentConfig c;
  c.name = "small";
  c.problem.n = 5;
  c.problem.m = 40;
  c.problem.nodes = 4;
  c.problem.seed = 3;
  c.topology.seed = 2;
  c.method.name = method;
  c.method.eta = 0.1;
  c.method.delta = 1.0;
  return c;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST(Config, RoundTripIsLossless) {
  ExperimentConfig c = small_logistic("sdinas");
  c.topology.kind = "edges";
  c.topology.edges = {{0, 1}, {1, 2}, {2, 3}};
  c.method.beta = 0.123456789012345678;
  c.method.gamma0 = 1.0 / 3.0;
  c.r = 10.0;
  c.output_dir = "out/x";
  const ExperimentConfig back = parse_config(dump_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(dump_config(back), dump_config(c));
}

TEST(Config, DefaultsFillMissingFields) {
  const ExperimentConfig c = parse_config(R"({"name": "bare"})");
  ExperimentConfig want;
  want.name = "bare";
  EXPECT_EQ(c, want);
}

TEST(Config, SyntaxErrorReportsLine) {
  try {
    parse_config("{\n  \"name\": \"x\",\n  \"cost\": {\"r\": }\n}");
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Config, UnknownFieldNamed) {
  try {
    parse_config(R"({"method": {"name": "dinas", "betta": 0.1}})");
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("method.betta"), std::string::npos) << e.what();
  }
}

TEST(Config, TypeAndRangeErrorsNamed) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(R"({"method": {"beta": "big"}})").find("method.beta"), std::string::npos);
  EXPECT_NE(message(R"({"method": {"beta": -1}})").find("method.beta"), std::string::npos);
  EXPECT_NE(message(R"({"method": {"name": "newton"}})").find("method.name"), std::string::npos);
  EXPECT_NE(message(R"({"problem": {"m": 201, "nodes": 5}})").find("problem.m"), std::string::npos);
  EXPECT_NE(message(R"({"problem": {"seed": -3}})").find("problem.seed"), std::string::npos);
  EXPECT_NE(message(R"({"schema_version": 9})").find("schema_version"), std::string::npos);
  EXPECT_NE(message(R"({"topology": {"kind": "edges", "edges": [[0, 0]]}})").find("topology.edges"),
            std::string::npos);
  EXPECT_NE(message(R"({"cost": {"r": -1}})").find("cost.r"), std::string::npos);
}

TEST(Config, BadTopologySurfacesAsConfigError) {
  ExperimentConfig c = small_logistic();
  c.topology.kind = "edges";
  c.topology.edges = {{0, 1}};
  EXPECT_THROW(build_experiment(c), ConfigError);
}

TEST(Csv, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) EXPECT_EQ(std::stod(format_double(v)), v);
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(Csv, IterationColumnsAndLedgerTotals) {
  const ExperimentConfig c = small_logistic();
  const Experiment ex = build_experiment(c);
  const RunResult run = dinas_run(PenaltyProblem(ex.costs, 0.1, ex.consensus), ex.x0, dinas_options(c.method));
  const std::string csv = iterations_csv(run);
  std::istringstream in(csv);
  std::string header, line, last;
  std::getline(in, header);
  EXPECT_EQ(header, "k,grad_inf,eta_k,alpha_k,gamma_k,inner_iters,rejections,condition,scalar_ops_cum,scalars_sent_cum");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    last = line;
    ++rows;
  }
  EXPECT_EQ(rows, run.records.size());
  const std::string tail = std::to_string(run.ledger.scalar_ops) + "," + std::to_string(run.ledger.scalars_sent);
  EXPECT_EQ(last.substr(last.size() - tail.size()), tail);
}

TEST(Csv, PlotStartsAtZeroCost) {
  const ExperimentConfig c = small_logistic();
  const Experiment ex = build_experiment(c);
  const RunResult run = dinas_run(PenaltyProblem(ex.costs, 0.1, ex.consensus), ex.x0, dinas_options(c.method));
  const std::string csv = plot_csv(run, 1.0, 1.0);
  EXPECT_EQ(csv.rfind("iteration,total_cost,log10_grad_inf,log10_consensus_error\n0,0,", 0), 0u);
}

TEST(RunExperiment, WritesArtifactsAndSummary) {
  const fs::path out = scratch_dir("artifacts");
  const ExperimentOutcome o = run_experiment(small_logistic("sdinas"), out);
  EXPECT_EQ(o.exit_code, kExitOk);
  for (const char* f : {"iterations.csv", "plot.csv", "stages.csv", "summary.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto sum = nlohmann::json::parse(slurp(out / "summary.json"));
  EXPECT_EQ(sum["status"], "converged");
  EXPECT_EQ(sum["method"], "sdinas");
  for (const char* k : {"final_grad_inf", "iterations", "total_cost", "gamma_reductions", "wall_time_seconds"})
    EXPECT_TRUE(sum.contains(k)) << k;
  EXPECT_FALSE(fs::exists(out / "summary.json.tmp"));
}

TEST(RunExperiment, EveryMethodRuns) {
  for (const char* m : {"dinas", "sdinas", "dinasc", "dg", "extra", "diging"}) {
    ExperimentConfig c = small_logistic(m);
    c.method.max_iters = 200;
    const ExperimentOutcome o = run_experiment(c, scratch_dir(std::string("method_") + m));
    EXPECT_TRUE(o.exit_code == kExitOk || o.exit_code == kExitNonConvergence) << m;
    EXPECT_EQ(o.summary["method"], m);
  }
}

TEST(RunExperiment, NonConvergenceExitCode) {
  ExperimentConfig c = small_logistic();
  c.method.max_outer = 1;
  const ExperimentOutcome o = run_experiment(c, scratch_dir("nonconv"));
  EXPECT_EQ(o.exit_code, kExitNonConvergence);
  EXPECT_EQ(o.summary["status"], "not_converged");
}

TEST(RunExperiment, ByteIdenticalReruns) {
  const ExperimentConfig c = small_logistic("sdinas");
  const fs::path a = scratch_dir("rerun_a"), b = scratch_dir("rerun_b");
  run_experiment(c, a);
  run_experiment(c, b);
  for (const char* f : {"iterations.csv", "plot.csv", "stages.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Report, TabulatesSummaries) {
  const fs::path root = scratch_dir("report");
  run_experiment(small_logistic("dinas"), root / "b");
  run_experiment(small_logistic("diging"), root / "a");
  const auto rows = collect_summaries(root);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].dir, "a");
  const std::string csv = report_csv(rows);
  EXPECT_NE(csv.find("\na,small,diging,"), std::string::npos);
  EXPECT_NE(csv.find("\nb,small,dinas,converged,"), std::string::npos);
}

TEST(Cli, ValidateShippedConfigs) {
  for (const char* sub : {"forcing", "quadratic", "misc"})
    for (const auto& p : list_configs(fs::path(DINAS_CONFIG_DIR) / sub))
      EXPECT_EQ(cli("validate " + p.string()), kExitOk) << p;
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir("cli");
  write_text(dir / "broken.json", "{ \"name\": ");
  EXPECT_EQ(cli("validate " + (dir / "broken.json").string()), kExitConfig);
  EXPECT_EQ(cli("validate " + (dir / "missing.json").string()), kExitConfig);
  EXPECT_EQ(cli("frobnicate"), kExitConfig);

  ExperimentConfig c = small_logistic();
  write_text(dir / "ok.json", dump_config(c));
  EXPECT_EQ(cli("run " + (dir / "ok.json").string() + " --out " + (dir / "ok_out").string()), kExitOk);
  EXPECT_TRUE(fs::exists(dir / "ok_out" / "summary.json"));

  c.method.max_outer = 1;
  write_text(dir / "short.json", dump_config(c));
  EXPECT_EQ(cli("run " + (dir / "short.json").string() + " --out " + (dir / "short_out").string()),
            kExitNonConvergence);

  EXPECT_EQ(cli("report " + dir.string() + " --out " + (dir / "report.csv").string()), kExitOk);
  EXPECT_TRUE(fs::exists(dir / "report.csv"));
  EXPECT_EQ(cli("report " + (dir / "nothing_here").string()), kExitConfig);
}

TEST(Cli, SeedOverrideChangesRun) {
  const fs::path dir = scratch_dir("seed");
  write_text(dir / "c.json", dump_config(small_logistic()));
  ASSERT_EQ(cli("run " + (dir / "c.json").string() + " --out " + (dir / "a").string()), kExitOk);
  ASSERT_EQ(cli("--seed-override 99 run " + (dir / "c.json").string() + " --out " + (dir / "b").string()), kExitOk);
  ASSERT_EQ(cli("run " + (dir / "c.json").string() + " --seed-override 99 --out " + (dir / "c").string()), kExitOk);
  EXPECT_NE(slurp(dir / "a" / "iterations.csv"), slurp(dir / "b" / "iterations.csv"));
  EXPECT_EQ(slurp(dir / "b" / "iterations.csv"), slurp(dir / "c" / "iterations.csv"));
}

TEST(Cli, ForcingSweepConvergesAndIsDeterministic) {
  const fs::path dir = scratch_dir("sweep");
  const fs::path configs = fs::path(DINAS_CONFIG_DIR) / "forcing";
  ASSERT_EQ(cli("sweep " + configs.string() + " --out " + (dir / "a").string()), kExitOk);
  ASSERT_EQ(cli("sweep " + configs.string() + " --out " + (dir / "b").string()), kExitOk);
  const auto rows = collect_summaries(dir / "a");
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& r : rows) EXPECT_EQ(r.summary["status"], "converged") << r.dir;
  for (const auto& p : list_configs(configs))
    for (const char* f : {"iterations.csv", "plot.csv"})
      EXPECT_EQ(slurp(dir / "a" / p.stem() / f), slurp(dir / "b" / p.stem() / f)) << p.stem() << "/" << f;
}
