#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dinas/harness.hpp"

namespace fs = std::filesystem;
using namespace dinas;

namespace {

struct Flags {
  std::optional<std::uint64_t> seed_override;
  std::string out;
};

ExperimentConfig apply_overrides(ExperimentConfig cfg, const Flags& f) {
  if (f.seed_override) {
    cfg.problem.seed = *f.seed_override;
    cfg.topology.seed = *f.seed_override;
  }
  return cfg;
}

fs::path output_dir(const ExperimentConfig& cfg, const Flags& f) {
  if (!f.out.empty()) return f.out;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return fs::path("results") / cfg.name;
}

int run_one(const ExperimentConfig& cfg, const fs::path& out) {
  const ExperimentOutcome o = run_experiment(cfg, out);
  const auto& s = o.summary;
  std::printf("%s: %s, %zu iterations, final |g| %s, total cost %s -> %s\n", cfg.name.c_str(),
              s["status"].get<std::string>().c_str(), s["iterations"].get<std::size_t>(),
              s["final_grad_inf"].dump().c_str(), s["total_cost"].dump().c_str(), out.string().c_str());
  if (s.contains("error")) std::fprintf(stderr, "%s: %s\n", cfg.name.c_str(), s["error"].get<std::string>().c_str());
  return o.exit_code;
}

int cmd_run(const std::string& path, const Flags& f) {
  const ExperimentConfig cfg = apply_overrides(load_config(path), f);
  return run_one(cfg, output_dir(cfg, f));
}

int cmd_sweep(const std::string& dir, const Flags& f) {
  const auto configs = list_configs(dir);
  if (configs.empty()) throw ConfigError("no *.json configs in " + dir);
  const fs::path root = f.out.empty() ? fs::path("results") : fs::path(f.out);
  int worst = kExitOk;
  for (const auto& p : configs) {
    int code = kExitOk;
    try {
      const ExperimentConfig cfg = apply_overrides(load_config(p), f);
      code = run_one(cfg, root / p.stem());
    } catch (const ConfigError& e) {
      std::fprintf(stderr, "config error: %s\n", e.what());
      code = kExitConfig;
    }
    worst = std::max(worst, code);
  }
  return worst;
}

int cmd_validate(const std::string& path, const Flags& f) {
  const ExperimentConfig cfg = apply_overrides(load_config(path), f);
  const Experiment ex = build_experiment(cfg);
  const Topology& t = ex.consensus.topology();
  std::printf("%s: ok (%s on %s, N = %d, n = %ld, %zu edges, diameter %d)\n", cfg.name.c_str(),
              cfg.method.name.c_str(), cfg.problem.family.c_str(), t.node_count(),
              static_cast<long>(ex.x0.dim()), t.edges().size(), t.diameter());
  return kExitOk;
}

int cmd_report(const std::string& dir, const Flags& f) {
  const auto rows = collect_summaries(dir);
  if (rows.empty()) throw ConfigError("no summary.json found below " + dir);
  const std::string csv = report_csv(rows);
  std::fputs(csv.c_str(), stdout);
  write_file_atomic(f.out.empty() ? fs::path(dir) / "report.csv" : fs::path(f.out), csv);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed inexact Newton experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags flags;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed-override", seed, "Replace every seed in the config");
  app.add_option("--out", flags.out, "Output directory (run, sweep) or report file (report)");

  std::string target;
  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("config", target, "Config file")->required();
  auto* sweep = app.add_subcommand("sweep", "Run every *.json config in a directory");
  sweep->add_option("config-dir", target, "Directory of configs")->required();
  auto* val = app.add_subcommand("validate", "Check a config and build its problem");
  val->add_option("config", target, "Config file")->required();
  auto* report = app.add_subcommand("report", "Tabulate summary.json files below a results directory");
  report->add_option("results-dir", target, "Results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  if (seed_opt->count() > 0) flags.seed_override = seed;

  try {
    if (run->parsed()) return cmd_run(target, flags);
    if (sweep->parsed()) return cmd_sweep(target, flags);
    if (val->parsed()) return cmd_validate(target, flags);
    if (report->parsed()) return cmd_report(target, flags);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
