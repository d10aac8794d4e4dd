#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "dinas/dinas.hpp"

namespace dinas {

enum class BaselineMethod { DG, Extra, DIGing };

inline const char* to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::DG: return "dg";
    case BaselineMethod::Extra: return "extra";
    case BaselineMethod::DIGing: return "diging";
  }
  return "?";
}

struct BaselineConfig {
  BaselineMethod method = BaselineMethod::DIGing;
  double step_size = 0.0;  // <= 0: default_baseline_step
  double step_scale = 0.5;
  int max_iters = 100000;
  double tol_error = 1e-4;  // on e, used when y* is given
  double tol_grad = 1e-5;   // on the stationarity measure otherwise
  double divergence_threshold = 1e12;
};

/// step_scale (1 + lambda_min(W)) / M, inside the standard stability range of
/// all three methods for M-smooth local costs.
inline double default_baseline_step(const ConsensusMatrix& w, double big_m, double step_scale) {
  if (!(big_m > 0.0)) throw Error("baseline step: M must be positive");
  if (!(step_scale > 0.0)) throw Error("baseline step: scale must be positive");
  return step_scale * (1.0 + min_eigenvalue(w)) / big_m;
}

namespace detail {

inline StackedPoint mix(const ConsensusMatrix& w, const StackedPoint& x) {
  StackedPoint out(x.nodes(), x.dim());
  for (int i = 0; i < x.nodes(); ++i) {
    Vector v = w.self_weight(i) * x.block(i);
    for (int j : w.topology().neighbors(i)) v += w.weight(i, j) * x.block(j);
    out.block(i) = v;
  }
  return out;
}

inline StackedPoint local_gradients(const CostList& costs, const StackedPoint& x) {
  StackedPoint g(x.nodes(), x.dim());
  for (int i = 0; i < x.nodes(); ++i) g.block(i) = costs[i]->gradient(x.block(i));
  return g;
}

inline std::int64_t mixing_ops(const Topology& t, Index n) {
  std::int64_t s = 0;
  for (int i = 0; i < t.node_count(); ++i) s += ops::mixing(t.degree(i), n);
  return s;
}

inline std::int64_t gradient_ops(const CostList& costs) {
  std::int64_t s = 0;
  for (const auto& c : costs) s += c->gradient_ops();
  return s;
}

}  // namespace detail

/// max(|sum_i grad f_i(xbar)|_inf, max_i |x_i - xbar|_inf): zero exactly at a
/// consensus minimizer. A monitor only; not charged to the ledger.
inline double stationarity_measure(const CostList& costs, const StackedPoint& x) {
  Vector mean = Vector::Zero(x.dim());
  for (int i = 0; i < x.nodes(); ++i) mean += x.block(i);
  mean /= static_cast<double>(x.nodes());
  Vector g = Vector::Zero(x.dim());
  double spread = 0.0;
  for (int i = 0; i < x.nodes(); ++i) {
    g += costs[i]->gradient(mean);
    spread = std::max(spread, inf_norm(x.block(i) - mean));
  }
  return std::max(inf_norm(g), spread);
}

/// Synchronous first-order baselines.
///   DG:     x+ = W x - a grad f(x)
///   EXTRA:  x1 = W x0 - a grad f(x0);  x+ = (I + W) x - (I + W)/2 x- - a (grad f(x) - grad f(x-))
///   DIGing: x+ = W x - a y;  y+ = W y + grad f(x+) - grad f(x),  y0 = grad f(x0)
inline RunResult baseline_run(const CostList& costs, const ConsensusMatrix& w, const StackedPoint& x0,
                              const BaselineConfig& cfg, double step, const std::optional<Vector>& y_star = {},
                              CostLedger ledger = {}) {
  require_dims(static_cast<int>(costs.size()) == w.node_count() && x0.nodes() == w.node_count(),
               "baseline_run: one cost and one block per node");
  if (!(step > 0.0)) throw Error("baseline_run: step size must be positive");
  if (y_star && !(y_star->squaredNorm() > 0.0)) throw Error("baseline_run: y* is zero, relative error undefined");
  const Topology& t = w.topology();
  const Index n = x0.dim();
  const std::int64_t sent_per_exchange = t.directed_edge_count() * n;
  const std::int64_t mix_ops = detail::mixing_ops(t, n);
  const std::int64_t grad_ops = detail::gradient_ops(costs);
  const std::int64_t axpy_ops = static_cast<std::int64_t>(x0.nodes()) * n;

  RunResult out;
  out.method = to_string(cfg.method);
  StackedPoint x = x0;
  StackedPoint g = detail::local_gradients(costs, x);
  ledger.add_ops(grad_ops);
  StackedPoint x_prev, g_prev, wx_prev, y;
  if (cfg.method == BaselineMethod::DIGing) y = g;

  auto measure = [&](const StackedPoint& p) {
    return y_star ? relative_consensus_error(p, *y_star) : stationarity_measure(costs, p);
  };
  const double tol = y_star ? cfg.tol_error : cfg.tol_grad;
  double m = measure(x);
  out.initial_grad_inf = stationarity_measure(costs, x);

  for (int k = 0;; ++k) {
    if (m <= tol) {
      out.converged = true;
      break;
    }
    if (k >= cfg.max_iters) break;
    IterationRecord rec;
    rec.k = k;
    rec.grad_inf = stationarity_measure(costs, x);
    rec.alpha_k = step;
    rec.condition = Acceptance::None;

    StackedPoint wx = detail::mix(w, x);
    ledger.add_sent(sent_per_exchange);
    ledger.add_ops(mix_ops);
    StackedPoint next(x.nodes(), n);
    switch (cfg.method) {
      case BaselineMethod::DG:
        next.values() = wx.values() - step * g.values();
        ledger.add_ops(axpy_ops);
        break;
      case BaselineMethod::Extra:
        if (k == 0) {
          next.values() = wx.values() - step * g.values();
          ledger.add_ops(axpy_ops);
        } else {
          // (I + W) x - (x- + W x-)/2 - a (g - g-), with W x- kept from the last round
          next.values() = x.values() + wx.values() - 0.5 * (x_prev.values() + wx_prev.values()) -
                          step * (g.values() - g_prev.values());
          ledger.add_ops(5 * axpy_ops);
        }
        break;
      case BaselineMethod::DIGing:
        next.values() = wx.values() - step * y.values();
        ledger.add_ops(axpy_ops);
        break;
    }
    StackedPoint g_next = detail::local_gradients(costs, next);
    ledger.add_ops(grad_ops);
    if (cfg.method == BaselineMethod::DIGing) {
      StackedPoint wy = detail::mix(w, y);
      ledger.add_sent(sent_per_exchange);
      ledger.add_ops(mix_ops);
      y.values() = wy.values() + g_next.values() - g.values();
      ledger.add_ops(2 * axpy_ops);
    }
    x_prev = std::move(x);
    g_prev = std::move(g);
    wx_prev = std::move(wx);
    x = std::move(next);
    g = std::move(g_next);

    if (!x.values().allFinite() || x.inf_norm() > cfg.divergence_threshold) {
      out.diverged = true;
      rec.next_grad_inf = std::numeric_limits<double>::infinity();
      rec.ledger = ledger;
      out.records.push_back(rec);
      break;
    }
    m = measure(x);
    rec.next_grad_inf = stationarity_measure(costs, x);
    if (y_star) rec.consensus_error = m;
    rec.ledger = ledger;
    out.records.push_back(rec);
  }
  out.x = x;
  out.final_grad_inf = out.records.empty() ? out.initial_grad_inf : out.records.back().next_grad_inf;
  out.ledger = ledger;
  return out;
}

}  // namespace dinas
