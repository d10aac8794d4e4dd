#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "dinas/dinas.hpp"

namespace dinas {

struct LinearSolveResult {
  Vector direction;
  double residual_inf = 0.0;
  long iterations = 0;
  std::int64_t scalar_ops = 0;
};

/// Given (hessian, gradient, eta, warm start) returns d with
/// |hessian d - gradient|_inf <= eta |gradient|_inf.
using LinearSolver = std::function<LinearSolveResult(const Matrix&, const Vector&, double, const Vector&)>;

/// Exact Cholesky solve; residual reported as measured.
inline LinearSolver dense_direct_solver() {
  return [](const Matrix& h, const Vector& g, double, const Vector&) {
    Eigen::LLT<Matrix> llt(h);
    if (llt.info() != Eigen::Success) throw NumericalError("dense solver: Hessian is not positive definite");
    LinearSolveResult r;
    r.direction = llt.solve(g);
    r.residual_inf = inf_norm(h * r.direction - g);
    r.scalar_ops = ops::factorization(h.rows()) + 2 * ops::triangular_solve(h.rows());
    return r;
  };
}

/// The distributed inner solvers run on a single node: same iteration, same
/// stopping rule, same relaxation policy.
inline LinearSolver block_solver(SolverConfig cfg) {
  return [cfg](const Matrix& h, const Vector& g, double eta, const Vector& d0) {
    BlockRow row;
    row.diag_block = h;
    row.diag = h.diagonal();
    row.self_weight = 1.0;
    std::vector<BlockRow> rows{std::move(row)};
    BlockHessian bh(h.rows(), 1.0, std::move(rows));
    auto [d, rep] = inner_solve(bh, StackedPoint(1, g.size(), g), eta, cfg, StackedPoint(1, d0.size(), d0));
    LinearSolveResult r;
    r.direction = d.values();
    r.residual_inf = rep.final_residual_inf;
    r.iterations = rep.iterations;
    r.scalar_ops = rep.scalar_ops;
    return r;
  };
}

struct CentralizedProblem {
  CostPtr cost;
  ProblemConstants constants;
};

struct DinascOptions {
  ForcingSchedule schedule;
  double gamma0 = 1.0;
  double q = 0.5;
  double tol = 1e-5;
  int max_outer = 1000;
  bool warm_start = true;
  int rejection_cap = 200;
  bool record_iterates = false;
  /// Fixed step mode: gamma pinned at mu^2/L from the problem constants. Failed
  /// decrease checks are counted in `rejections` but the step is taken anyway.
  bool fixed_step = false;
};

/// alpha = min{1, (1 - eta)/(1 + eta)^2 * (mu^2/L) / |g|}; 1 when L = 0.
inline double fixed_polyak_step(const ProblemConstants& c, double eta_k, double grad_norm) {
  if (!(grad_norm > 0.0)) throw Error("fixed_polyak_step: gradient norm must be positive");
  if (!(c.lip_hess > 0.0)) return 1.0;
  return adaptive_step(eta_k, c.mu * c.mu / c.lip_hess, grad_norm);
}

/// Centralized inexact Newton with the adaptive step, trial point y - alpha d.
inline RunResult dinasc_run(const CentralizedProblem& prob, const Vector& y0, const DinascOptions& opt,
                            const LinearSolver& solver) {
  const LocalCost& f = *prob.cost;
  require_dims(y0.size() == f.dimension(), "dinasc_run: initial point");
  if (opt.fixed_step && !(prob.constants.mu > 0.0)) throw Error("dinasc_run: fixed step needs mu > 0");
  RunResult out;
  out.method = opt.fixed_step ? "dinasc-fixed" : "dinasc";
  CostLedger ledger;
  Vector y = y0;
  Vector g = f.gradient(y);
  ledger.add_ops(f.gradient_ops() + f.dimension());
  double grad_inf = inf_norm(g);
  Matrix h = f.hessian(y);
  ledger.add_ops(f.hessian_ops());
  out.initial_grad_inf = grad_inf;
  StepController ctl{opt.gamma0, opt.q, 0};
  const double pinned_gamma = prob.constants.lip_hess > 0.0 ? prob.constants.mu * prob.constants.mu / prob.constants.lip_hess
                                                            : std::numeric_limits<double>::infinity();
  if (opt.fixed_step) ctl.gamma = pinned_gamma;
  std::optional<double> prev_eta;
  Vector direction = Vector::Zero(f.dimension());
  if (opt.record_iterates) out.iterates.push_back(StackedPoint(1, y.size(), y));
  int k = 0;
  while (true) {
    if (grad_inf <= opt.tol) {
      out.converged = true;
      break;
    }
    if (k >= opt.max_outer) break;
    IterationRecord rec;
    rec.k = k;
    rec.grad_inf = grad_inf;
    const double eta_k = forcing_term(opt.schedule, grad_inf, prev_eta);
    prev_eta = eta_k;
    rec.eta_k = eta_k;
    const Vector d0 = opt.warm_start ? direction : Vector::Zero(f.dimension());
    rec.zero_start = inf_norm(d0) == 0.0;
    LinearSolveResult ls = solver(h, g, eta_k, d0);
    ledger.add_ops(ls.scalar_ops);
    rec.inner_iterations = ls.iterations;
    rec.inner_residual = ls.residual_inf;
    Vector trial, trial_g;
    double trial_inf = 0.0;
    for (;;) {
      const double alpha = opt.fixed_step ? fixed_polyak_step(prob.constants, eta_k, grad_inf)
                                          : adaptive_step(eta_k, ctl.gamma, grad_inf);
      trial = y - alpha * ls.direction;
      trial_g = f.gradient(trial);
      ledger.add_ops(f.gradient_ops() + 2 * f.dimension());
      trial_inf = inf_norm(trial_g);
      const Acceptance a = acceptance_check(alpha, trial_inf, grad_inf, eta_k, ctl.gamma);
      if (a != Acceptance::Rejected || opt.fixed_step) {
        if (a == Acceptance::Rejected) ++rec.rejections;
        rec.alpha_k = alpha;
        rec.gamma_k = ctl.gamma;
        rec.condition = a;
        break;
      }
      ++rec.rejections;
      if (rec.rejections > opt.rejection_cap)
        throw RejectionLoopExceeded("rejection loop exceeded " + std::to_string(opt.rejection_cap) +
                                    " reductions at iteration " + std::to_string(k));
      ctl.reduce();
    }
    y = std::move(trial);
    g = std::move(trial_g);
    grad_inf = trial_inf;
    direction = std::move(ls.direction);
    h = f.hessian(y);
    ledger.add_ops(f.hessian_ops());
    rec.next_grad_inf = grad_inf;
    rec.ledger = ledger;
    out.records.push_back(rec);
    if (opt.record_iterates) out.iterates.push_back(StackedPoint(1, y.size(), y));
    ++k;
  }
  out.x = StackedPoint(1, y.size(), y);
  out.final_grad_inf = grad_inf;
  out.ledger = ledger;
  out.gamma_reductions = ctl.reductions;
  out.gamma_final = ctl.gamma;
  return out;
}

}  // namespace dinas
