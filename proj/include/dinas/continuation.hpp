#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dinas/dinas.hpp"

namespace dinas {

inline double consensus_error(const StackedPoint& x, const Vector& y_star) {
  return relative_consensus_error(x, y_star);
}

/// max_i |x_i - y*|_2
inline double max_block_distance(const StackedPoint& x, const Vector& y_star) {
  double m = 0.0;
  for (int i = 0; i < x.nodes(); ++i) m = std::max(m, (x.block(i) - y_star).norm());
  return m;
}

/// beta_{s+1} = theta beta_s, eps_{s+1} = theta eps_s
struct ContinuationSchedule {
  double beta0 = 0.1;
  double eps0 = 1e-3;  // 0.01 beta0
  double theta = 0.1;
  int max_stages = 8;
};

struct SdinasOptions {
  ContinuationSchedule schedule;
  DinasOptions dinas;  // tol is replaced by eps_s in each stage
  std::optional<Vector> y_star;
  double target_error = 0.0;  // stop as soon as e_k <= target (needs y_star); 0 disables
};

struct StageRecord {
  int stage = 0;
  double beta = 0.0;
  double eps = 0.0;
  int outer_iters = 0;
  double final_grad_inf = 0.0;
  double regrad_inf = 0.0;  // |grad Phi_beta_s| re-evaluated independently of the run
  double consensus_error = std::numeric_limits<double>::quiet_NaN();
  double max_distance = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  CostLedger ledger;  // cumulative
};

struct StagedRunResult {
  std::vector<StageRecord> stages;
  RunResult combined;  // every stage's iterations with a global k
  StackedPoint x;
  bool reached_target = false;
  CostLedger ledger;
};

inline StagedRunResult sdinas_run(const CostList& costs, const ConsensusMatrix& consensus, const StackedPoint& x0,
                                  const SdinasOptions& opt) {
  const auto& sch = opt.schedule;
  if (!(sch.beta0 > 0.0) || !(sch.eps0 > 0.0) || !(sch.theta > 0.0 && sch.theta < 1.0))
    throw Error("sdinas: need beta0 > 0, eps0 > 0, theta in (0,1)");
  if (opt.target_error > 0.0 && !opt.y_star) throw Error("sdinas: a consensus-error target needs y*");
  StagedRunResult out;
  out.combined.method = "sdinas";
  StackedPoint x = x0;
  CostLedger ledger;
  double beta = sch.beta0;
  double eps = sch.eps0;
  int k_offset = 0;
  bool first_stage = true;
  auto hit_target = [&](const StackedPoint& p) {
    return opt.target_error > 0.0 && consensus_error(p, *opt.y_star) <= opt.target_error;
  };
  if (hit_target(x)) out.reached_target = true;

  for (int s = 1; s <= sch.max_stages && !out.reached_target; ++s) {
    const PenaltyProblem prob(costs, beta, consensus);
    DinasOptions dopt = opt.dinas;
    dopt.tol = eps;
    if (opt.target_error > 0.0) dopt.stop_hook = hit_target;
    if (opt.y_star && opt.y_star->squaredNorm() > 0.0) dopt.y_star = opt.y_star;
    RunResult run = dinas_run(prob, x, dopt, ledger);
    if (!run.converged && !run.stopped_by_hook)
      throw NonConvergence("sdinas stage " + std::to_string(s) + " (beta = " + std::to_string(beta) +
                  ") did not converge within " + std::to_string(dopt.max_outer) + " iterations");
    ledger = run.ledger;
    x = run.x;
    StageRecord rec;
    rec.stage = s;
    rec.beta = beta;
    rec.eps = eps;
    rec.outer_iters = static_cast<int>(run.records.size());
    rec.final_grad_inf = run.final_grad_inf;
    rec.regrad_inf = penalty_gradient(prob, x).inf_norm();
    rec.converged = run.converged;
    if (opt.y_star && opt.y_star->squaredNorm() > 0.0) {
      rec.consensus_error = consensus_error(x, *opt.y_star);
      rec.max_distance = max_block_distance(x, *opt.y_star);
    }
    rec.ledger = ledger;
    out.stages.push_back(rec);
    for (auto r : run.records) {
      r.k += k_offset;
      out.combined.records.push_back(r);
    }
    k_offset += rec.outer_iters;
    if (first_stage) out.combined.initial_grad_inf = run.initial_grad_inf;
    first_stage = false;
    out.combined.gamma_reductions += run.gamma_reductions;
    out.combined.gamma_final = run.gamma_final;
    out.combined.final_grad_inf = run.final_grad_inf;
    if (run.stopped_by_hook || hit_target(x)) out.reached_target = true;
    beta *= sch.theta;
    eps *= sch.theta;
  }
  out.x = x;
  out.ledger = ledger;
  out.combined.x = x;
  out.combined.ledger = ledger;
  out.combined.converged = opt.target_error > 0.0 ? out.reached_target : !out.stages.empty() && out.stages.back().converged;
  return out;
}

}  // namespace dinas
