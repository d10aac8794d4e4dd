#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dinas/common.hpp"
#include "dinas/cost.hpp"
#include "dinas/dsf.hpp"
#include "dinas/linear_solvers.hpp"
#include "dinas/objectives.hpp"

namespace dinas {

/// eta_k = min{eta, eta |g|^delta}
struct ForcingSchedule {
  double eta = 0.9;
  double delta = 0.0;
};

/// The forcing term for a gradient norm, clamped to the previous term so the
/// sequence never increases along a run.
inline double forcing_term(const ForcingSchedule& s, double grad_inf, std::optional<double> previous = {}) {
  if (grad_inf < 0.0) throw Error("forcing_term: negative gradient norm");
  double e = std::min(s.eta, s.eta * std::pow(grad_inf, s.delta));
  if (previous) e = std::min(e, *previous);
  return e;
}

/// alpha = min{1, (1 - eta)/(1 + eta)^2 * gamma / |g|}
inline double adaptive_step(double eta_k, double gamma_k, double grad_inf) {
  if (!(grad_inf > 0.0)) throw Error("adaptive_step: gradient is zero, the iterate is already stationary");
  const double c = (1.0 - eta_k) / ((1.0 + eta_k) * (1.0 + eta_k));
  return std::min(1.0, c * gamma_k / grad_inf);
}

enum class Acceptance { Cond1, Cond2, Rejected, None };

inline const char* to_string(Acceptance a) {
  switch (a) {
    case Acceptance::Cond1: return "cond1";
    case Acceptance::Cond2: return "cond2";
    case Acceptance::Rejected: return "rejected";
    case Acceptance::None: return "none";
  }
  return "?";
}

/// Sufficient-decrease test on the gradient norm. cond1 covers damped steps,
/// cond2 full steps.
inline Acceptance acceptance_check(double alpha, double new_grad_inf, double grad_inf, double eta_k,
                                   double gamma_k) {
  const double opl = 1.0 + eta_k;
  if (alpha < 1.0) {
    const double omn = 1.0 - eta_k;
    if (new_grad_inf <= grad_inf - 0.5 * gamma_k * omn * omn / (opl * opl)) return Acceptance::Cond1;
    return Acceptance::Rejected;
  }
  if (new_grad_inf <= eta_k * grad_inf + opl * opl * grad_inf * grad_inf / (2.0 * gamma_k))
    return Acceptance::Cond2;
  return Acceptance::Rejected;
}

struct StepController {
  double gamma = 1.0;
  double q = 0.5;
  int reductions = 0;

  void reduce() {
    gamma *= q;
    ++reductions;
  }
};

struct IterationRecord {
  int k = 0;
  double grad_inf = 0.0;       // |g^k|_inf at the start of the iteration
  double next_grad_inf = 0.0;  // |g^{k+1}|_inf after acceptance
  double eta_k = 0.0;
  double alpha_k = 0.0;
  double gamma_k = 0.0;  // gamma used by the accepted step
  long inner_iterations = 0;
  double inner_residual = 0.0;
  double omega = 0.0;
  double m_norm = std::numeric_limits<double>::quiet_NaN();  // |I - omega H D^-1|_inf when diagnostics are on
  bool zero_start = false;                                    // inner solve started from d = 0
  int rejections = 0;
  Acceptance condition = Acceptance::Rejected;
  double consensus_error = std::numeric_limits<double>::quiet_NaN();  // e at x^{k+1} when y* is known
  CostLedger ledger;  // cumulative, after the iteration
};

struct RunResult {
  std::string method;
  std::vector<IterationRecord> records;
  StackedPoint x;
  double initial_grad_inf = 0.0;
  double final_grad_inf = 0.0;
  bool converged = false;
  bool diverged = false;
  bool stopped_by_hook = false;
  CostLedger ledger;
  int gamma_reductions = 0;
  double gamma_final = 0.0;
  std::vector<StackedPoint> iterates;  // x^0, x^1, ... when requested
};

struct DinasOptions {
  ForcingSchedule schedule;
  double gamma0 = 1.0;
  double q = 0.5;
  SolverConfig solver;
  double tol = 1e-5;
  int max_outer = 1000;
  bool warm_start = true;
  int rejection_cap = 200;
  bool record_iterates = false;
  bool diagnostics = false;
  /// Evaluated on the current iterate before every iteration; returning true
  /// ends the run (e.g. a consensus-error target).
  std::function<bool(const StackedPoint&)> stop_hook;
  /// Reference consensus solution; when set every record carries e at x^{k+1}.
  std::optional<Vector> y_star;
};

struct DinasState {
  StackedPoint x;
  StackedPoint g;
  double grad_inf = 0.0;
  BlockHessian blocks;
  StackedPoint direction;  // last accepted direction, used as warm start
  StepController controller;
  std::optional<double> prev_eta;
  int k = 0;
};

/// e = (1/N) sum_i |x_i - y*|^2 / |y*|^2
inline double relative_consensus_error(const StackedPoint& x, const Vector& y_star) {
  require_dims(x.dim() == y_star.size(), "consensus_error: reference dimension");
  const double ref = y_star.squaredNorm();
  if (!(ref > 0.0)) throw Error("consensus_error: reference solution is zero, relative error undefined");
  double s = 0.0;
  for (int i = 0; i < x.nodes(); ++i) s += (x.block(i) - y_star).squaredNorm();
  return s / (static_cast<double>(x.nodes()) * ref);
}

namespace detail {

inline std::vector<double> block_inf_norms(const StackedPoint& v) {
  std::vector<double> out;
  for (int i = 0; i < v.nodes(); ++i) out.push_back(v.block_inf_norm(i));
  return out;
}

inline double flood_max(const std::vector<double>& vals, const Topology& t, CostLedger& ledger) {
  const DsfResult r = dsf_max(vals, t);
  ledger.add_sent(r.scalars_sent);
  ledger.add_ops(r.scalars_received);
  return r.max;
}

/// Exchange of one n-vector per directed edge.
inline void exchange(const PenaltyProblem& p, CostLedger& ledger) {
  ledger.add_sent(p.topology().directed_edge_count() * p.dim());
}

inline void count_gradient(const PenaltyProblem& p, CostLedger& ledger) {
  for (int i = 0; i < p.nodes(); ++i)
    ledger.add_ops(p.cost(i).gradient_ops() + ops::penalty_gradient(p.topology().degree(i), p.dim()) + p.dim());
}

}  // namespace detail

/// x^0 given: exchange blocks, evaluate g^0 and |g^0| by flooding, build H^0.
inline DinasState dinas_init(const PenaltyProblem& p, const StackedPoint& x0, const DinasOptions& opt,
                             CostLedger& ledger) {
  p.check(x0);
  DinasState s;
  s.x = x0;
  detail::exchange(p, ledger);
  s.g = penalty_gradient(p, x0);
  detail::count_gradient(p, ledger);
  s.grad_inf = detail::flood_max(detail::block_inf_norms(s.g), p.topology(), ledger);
  s.blocks = assemble_block_hessian(p, x0, &ledger);
  s.direction = StackedPoint(p.nodes(), p.dim());
  s.controller = StepController{opt.gamma0, opt.q, 0};
  if (opt.solver.mode == SolverMode::Jor && opt.solver.omega_policy == OmegaPolicy::SafeBound) {
    // M and w_bar are network maxima computed once beforehand
    std::vector<double> ones(p.nodes(), 1.0);
    detail::flood_max(ones, p.topology(), ledger);
    detail::flood_max(ones, p.topology(), ledger);
  }
  return s;
}

/// One outer iteration. On rejection gamma shrinks by q and only the step size
/// and trial point are recomputed; the direction is kept.
inline IterationRecord dinas_iteration(DinasState& s, const PenaltyProblem& p, const DinasOptions& opt,
                                       CostLedger& ledger) {
  if (!(s.grad_inf > 0.0)) throw Error("dinas_iteration: gradient is already zero");
  IterationRecord rec;
  rec.k = s.k;
  rec.grad_inf = s.grad_inf;
  const double eta_k = forcing_term(opt.schedule, s.grad_inf, s.prev_eta);
  s.prev_eta = eta_k;
  rec.eta_k = eta_k;

  if (opt.solver.mode == SolverMode::Jor && opt.solver.omega_policy == OmegaPolicy::RowSum)
    detail::flood_max(local_row_sum_bounds(s.blocks), p.topology(), ledger);

  const StackedPoint d0 = opt.warm_start ? s.direction : StackedPoint(p.nodes(), p.dim());
  rec.zero_start = d0.inf_norm() == 0.0;
  auto [d, rep] = inner_solve(s.blocks, s.g, eta_k, opt.solver, d0);
  ledger.add_ops(rep.scalar_ops);
  ledger.add_sent(rep.scalars_sent);
  rec.inner_iterations = rep.iterations;
  rec.inner_residual = rep.final_residual_inf;
  rec.omega = rep.omega;
  if (opt.diagnostics && opt.solver.mode == SolverMode::Jor)
    rec.m_norm = iteration_matrix_inf_norm(s.blocks, rep.omega);

  StackedPoint trial(p.nodes(), p.dim());
  StackedPoint trial_g;
  double trial_inf = 0.0;
  for (;;) {
    const double gamma = s.controller.gamma;
    const double alpha = adaptive_step(eta_k, gamma, s.grad_inf);
    trial.values() = s.x.values() - alpha * d.values();
    ledger.add_ops(static_cast<std::int64_t>(p.nodes()) * p.dim());
    detail::exchange(p, ledger);
    trial_g = penalty_gradient(p, trial);
    detail::count_gradient(p, ledger);
    trial_inf = detail::flood_max(detail::block_inf_norms(trial_g), p.topology(), ledger);
    const Acceptance a = acceptance_check(alpha, trial_inf, s.grad_inf, eta_k, gamma);
    if (a != Acceptance::Rejected) {
      rec.alpha_k = alpha;
      rec.gamma_k = gamma;
      rec.condition = a;
      break;
    }
    ++rec.rejections;
    if (rec.rejections > opt.rejection_cap)
      throw RejectionLoopExceeded("rejection loop exceeded " + std::to_string(opt.rejection_cap) +
                                  " reductions at iteration " + std::to_string(s.k) +
                                  " (gamma = " + std::to_string(gamma) + ", |g| = " + std::to_string(s.grad_inf) +
                                  ", trial |g| = " + std::to_string(trial_inf) + ")");
    s.controller.reduce();
  }

  s.x = std::move(trial);
  s.g = std::move(trial_g);
  s.grad_inf = trial_inf;
  s.direction = std::move(d);
  s.blocks = assemble_block_hessian(p, s.x, &ledger);
  ++s.k;
  rec.next_grad_inf = s.grad_inf;
  if (opt.y_star) rec.consensus_error = relative_consensus_error(s.x, *opt.y_star);
  rec.ledger = ledger;
  return rec;
}

inline RunResult dinas_run(const PenaltyProblem& p, const StackedPoint& x0, const DinasOptions& opt,
                           CostLedger ledger = {}) {
  if (!(opt.tol > 0.0)) throw Error("dinas_run: tolerance must be positive");
  RunResult out;
  out.method = "dinas";
  DinasState s = dinas_init(p, x0, opt, ledger);
  out.initial_grad_inf = s.grad_inf;
  if (opt.record_iterates) out.iterates.push_back(s.x);
  while (true) {
    if (s.grad_inf <= opt.tol) {
      out.converged = true;
      break;
    }
    if (opt.stop_hook && opt.stop_hook(s.x)) {
      out.stopped_by_hook = true;
      break;
    }
    if (s.k >= opt.max_outer) break;
    out.records.push_back(dinas_iteration(s, p, opt, ledger));
    if (opt.record_iterates) out.iterates.push_back(s.x);
  }
  out.x = s.x;
  out.final_grad_inf = s.grad_inf;
  out.ledger = ledger;
  out.gamma_reductions = s.controller.reductions;
  out.gamma_final = s.controller.gamma;
  return out;
}

// ---------------------------------------------------------------------------
// Bounds from the convergence theory, evaluated on run constants

/// Iterations sufficient to reach |g| <= tol. std::nullopt when L = 0.
inline std::optional<long> complexity_bound(double grad0_inf, double eta_bar, double q, double mu, double lip_hess,
                                            double tol) {
  if (!(lip_hess > 0.0)) return std::nullopt;
  const double opl = 1.0 + eta_bar;
  const double c = q * (mu * mu / lip_hess) * (1.0 - eta_bar) * (1.0 - eta_bar) / (opl * opl);
  const double rho_hat = std::max(opl / 2.0, 1.0 - c / grad0_inf);
  if (!(rho_hat < 1.0) || !(rho_hat > 0.0)) throw NumericalError("complexity_bound: contraction factor outside (0,1)");
  const double v = std::log(grad0_inf / tol) / std::log(1.0 / rho_hat) + 1.0;
  return static_cast<long>(std::ceil(std::max(v, 1.0)));
}

/// Upper bound on the number of gamma reductions, ceil(log_{1/q}(gamma0 L / mu^2)).
inline long gamma_reduction_bound(double gamma0, double q, double mu, double lip_hess) {
  if (!(lip_hess > 0.0)) return 0;
  const double v = std::log(gamma0 * lip_hess / (mu * mu)) / std::log(1.0 / q);
  return v <= 0.0 ? 0 : static_cast<long>(std::ceil(v));
}

/// Bound on the damped-step iterations once gamma has settled.
inline long m2_bound(double grad_at_m1, double eta_bar, double q, double mu, double lip_hess) {
  if (!(lip_hess > 0.0)) return 0;
  const double opl = 1.0 + eta_bar;
  const double c = q * (mu * mu / lip_hess) * (1.0 - eta_bar) * (1.0 - eta_bar) / (opl * opl);
  const double gamma_bar = q * mu * mu / lip_hess;
  const double v = (grad_at_m1 - gamma_bar * (1.0 - eta_bar) / (opl * opl)) / c + 1.0;
  return static_cast<long>(std::ceil(std::max(v, 0.0)));
}

struct RunDiagnostics {
  double min_gamma = std::numeric_limits<double>::infinity();
  double gamma_floor = 0.0;  // q mu^2 / L
  long reduction_bound = 0;
  int m1 = 0;  // first iteration after the last gamma reduction
  long damped_after_m1 = 0;
  long m2 = 0;
  std::optional<long> k_eps;
  bool full_step_persisted = true;  // alpha = 1 never followed by alpha < 1
  std::vector<double> quadratic_ratios;  // |g^{k+1}| / |g^k|^2
  std::vector<double> round_factors;     // nu_k^(1/l_k), nu_k = |g^{k+1}|/|g^k|
};

inline RunDiagnostics diagnose(const RunResult& run, const ProblemConstants& c, double gamma0, double q,
                               double eta_bar, double tol) {
  RunDiagnostics d;
  if (c.lip_hess > 0.0) d.gamma_floor = q * c.mu * c.mu / c.lip_hess;
  d.reduction_bound = gamma_reduction_bound(gamma0, q, c.mu, c.lip_hess);
  for (const auto& r : run.records) {
    d.min_gamma = std::min(d.min_gamma, r.gamma_k);
    if (r.rejections > 0) d.m1 = r.k;
  }
  bool seen_full = false;
  for (const auto& r : run.records) {
    if (r.k >= d.m1 && r.alpha_k < 1.0) ++d.damped_after_m1;
    if (seen_full && r.alpha_k < 1.0) d.full_step_persisted = false;
    if (r.alpha_k == 1.0) seen_full = true;
    if (r.grad_inf > 0.0) d.quadratic_ratios.push_back(r.next_grad_inf / (r.grad_inf * r.grad_inf));
    if (r.inner_iterations > 0 && r.grad_inf > 0.0)
      d.round_factors.push_back(std::pow(r.next_grad_inf / r.grad_inf, 1.0 / static_cast<double>(r.inner_iterations)));
  }
  const double g_m1 = d.m1 < static_cast<int>(run.records.size()) ? run.records[d.m1].grad_inf : run.final_grad_inf;
  d.m2 = m2_bound(g_m1, eta_bar, q, c.mu, c.lip_hess);
  d.k_eps = complexity_bound(run.initial_grad_inf, eta_bar, q, c.mu, c.lip_hess, tol);
  return d;
}

}  // namespace dinas
