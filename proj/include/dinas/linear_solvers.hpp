#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dinas/common.hpp"
#include "dinas/cost.hpp"
#include "dinas/objectives.hpp"

namespace dinas {

/// Row i of the Newton matrix of Phi_beta, as held by node i.
struct BlockRow {
  Matrix diag_block;             // H_ii = hess f_i(x_i) + (1/beta)(1 - w_ii) I
  Vector diag;                   // D_ii, diagonal of H_ii
  std::vector<int> neighbors;    // O_i
  std::vector<double> coupling;  // H_ij = coupling[k] * I for j = neighbors[k]; equals -w_ij / beta
  double self_weight = 1.0;      // w_ii
};

class BlockHessian {
 public:
  BlockHessian() = default;
  BlockHessian(Index dim, double beta, std::vector<BlockRow> rows)
      : dim_(dim), beta_(beta), rows_(std::move(rows)) {}

  int nodes() const { return static_cast<int>(rows_.size()); }
  Index dim() const { return dim_; }
  double beta() const { return beta_; }
  const BlockRow& row(int i) const { return rows_.at(i); }
  int degree(int i) const { return static_cast<int>(rows_.at(i).neighbors.size()); }
  long directed_edge_count() const {
    long s = 0;
    for (const auto& r : rows_) s += static_cast<long>(r.neighbors.size());
    return s;
  }

  /// H_i d = H_ii d_i + sum_j H_ij d_j
  Vector row_times(int i, const StackedPoint& d) const {
    const BlockRow& r = rows_[i];
    Vector out = r.diag_block * d.block(i);
    for (std::size_t k = 0; k < r.neighbors.size(); ++k) out += r.coupling[k] * d.block(r.neighbors[k]);
    return out;
  }

  StackedPoint times(const StackedPoint& d) const {
    StackedPoint out(nodes(), dim_);
    for (int i = 0; i < nodes(); ++i) out.block(i) = row_times(i, d);
    return out;
  }

  /// Dense nN x nN matrix. Diagnostics and tests only.
  Matrix dense() const {
    const Index n = dim_;
    Matrix h = Matrix::Zero(nodes() * n, nodes() * n);
    for (int i = 0; i < nodes(); ++i) {
      const BlockRow& r = rows_[i];
      h.block(i * n, i * n, n, n) = r.diag_block;
      for (std::size_t k = 0; k < r.neighbors.size(); ++k)
        h.block(i * n, r.neighbors[k] * n, n, n).diagonal().setConstant(r.coupling[k]);
    }
    return h;
  }

 private:
  Index dim_ = 0;
  double beta_ = 1.0;
  std::vector<BlockRow> rows_;
};

inline BlockRow assemble_block_row(const PenaltyProblem& p, const StackedPoint& x, int i) {
  const ConsensusMatrix& w = p.consensus();
  BlockRow r;
  r.self_weight = w.self_weight(i);
  r.diag_block = p.cost(i).hessian(x.block(i));
  r.diag_block.diagonal().array() += (1.0 - r.self_weight) / p.beta();
  r.diag = r.diag_block.diagonal();
  r.neighbors = p.topology().neighbors(i);
  for (int j : r.neighbors) r.coupling.push_back(-w.weight(i, j) / p.beta());
  return r;
}

inline BlockHessian assemble_block_hessian(const PenaltyProblem& p, const StackedPoint& x,
                                           CostLedger* ledger = nullptr) {
  p.check(x);
  std::vector<BlockRow> rows;
  rows.reserve(p.nodes());
  for (int i = 0; i < p.nodes(); ++i) {
    rows.push_back(assemble_block_row(p, x, i));
    if (ledger) ledger->add_ops(p.cost(i).hessian_ops() + p.dim());
  }
  return BlockHessian(p.dim(), p.beta(), std::move(rows));
}

// ---------------------------------------------------------------------------
// JOR

/// One synchronous JOR round: d_i+ = d_i + omega D_ii^-1 (g_i - sum_j H_ij d_j).
inline StackedPoint jor_step(const BlockHessian& h, const StackedPoint& d, const StackedPoint& g, double omega) {
  StackedPoint out(h.nodes(), h.dim());
  for (int i = 0; i < h.nodes(); ++i) {
    const Vector& diag = h.row(i).diag;
    if ((diag.array() == 0.0).any()) throw NumericalError("JOR diagonal breakdown at node " + std::to_string(i));
    out.block(i) = d.block(i) + omega * (g.block(i) - h.row_times(i, d)).cwiseQuotient(diag);
  }
  return out;
}

/// Strict upper bound 2 beta (1 - w_bar) / (M + 2 beta) on the JOR relaxation.
/// Returns 0 when w_bar = 1 (JOR unusable; switch solver).
inline double jor_omega_bound(double big_m, double beta, double w_bar) {
  if (!(big_m > 0.0) || !(beta > 0.0) || !(w_bar > 0.0) || w_bar > 1.0)
    throw Error("jor_omega_bound: need M > 0, beta > 0, w_bar in (0, 1]");
  return 2.0 * beta * (1.0 - w_bar) / (big_m + 2.0 * beta);
}

/// max over rows of sum_c |H_rc| / D_rr, an upper bound on the spectral radius
/// of D^-1 H. Each node evaluates its own rows; the network maximum is one DSF.
inline std::vector<double> local_row_sum_bounds(const BlockHessian& h) {
  std::vector<double> out;
  for (int i = 0; i < h.nodes(); ++i) {
    const BlockRow& r = h.row(i);
    double coupling = 0.0;
    for (double c : r.coupling) coupling += std::abs(c);
    const Vector sums = r.diag_block.cwiseAbs().rowwise().sum().array() + coupling;
    out.push_back(sums.cwiseQuotient(r.diag.cwiseAbs()).maxCoeff());
  }
  return out;
}

/// |I - omega H D^-1|_inf, one block row at a time. Simulator-side diagnostic.
inline double iteration_matrix_inf_norm(const BlockHessian& h, double omega) {
  double worst = 0.0;
  const Index n = h.dim();
  for (int i = 0; i < h.nodes(); ++i) {
    const BlockRow& r = h.row(i);
    for (Index a = 0; a < n; ++a) {
      double s = 0.0;
      for (Index c = 0; c < n; ++c) {
        const double entry = (a == c ? 1.0 : 0.0) - omega * r.diag_block(a, c) / r.diag(c);
        s += std::abs(entry);
      }
      for (std::size_t k = 0; k < r.neighbors.size(); ++k)
        s += std::abs(omega * r.coupling[k] / h.row(r.neighbors[k]).diag(a));
      worst = std::max(worst, s);
    }
  }
  return worst;
}

/// ceil(ln eta / ln m_norm), the round count after which the JOR residual is
/// certified below eta |g| from a zero start.
inline long inner_iteration_bound(double eta_k, double m_norm) {
  if (!(m_norm < 1.0)) throw NumericalError("no contraction certificate: iteration matrix norm >= 1");
  if (!(eta_k > 0.0) || !(eta_k < 1.0)) throw Error("inner_iteration_bound: eta must lie in (0, 1)");
  if (m_norm <= 0.0) return 1;
  return static_cast<long>(std::ceil(std::log(eta_k) / std::log(m_norm)));
}

// ---------------------------------------------------------------------------
// Damped block solver: d_i+ = [hess f_i + I/beta]^-1 (sum_{j in O_i, j = i} w_ij d_j / beta + g_i)

class DampedBlockFactors {
 public:
  explicit DampedBlockFactors(const BlockHessian& h) {
    for (int i = 0; i < h.nodes(); ++i) {
      Matrix b = h.row(i).diag_block;
      b.diagonal().array() += h.row(i).self_weight / h.beta();
      factors_.emplace_back(b);
      if (factors_.back().info() != Eigen::Success)
        throw NumericalError("damped block solver: local factorization failed at node " + std::to_string(i));
    }
  }
  const Eigen::LLT<Matrix>& at(int i) const { return factors_.at(i); }

 private:
  std::vector<Eigen::LLT<Matrix>> factors_;
};

inline StackedPoint damped_block_step(const DampedBlockFactors& f, const BlockHessian& h, const StackedPoint& d,
                                      const StackedPoint& g) {
  StackedPoint out(h.nodes(), h.dim());
  for (int i = 0; i < h.nodes(); ++i) {
    const BlockRow& r = h.row(i);
    // the sum runs over the closed neighbourhood, so w_ii d_i / beta is included
    Vector rhs = g.block(i) + (r.self_weight / h.beta()) * d.block(i);
    // coupling = -w_ij / beta
    for (std::size_t k = 0; k < r.neighbors.size(); ++k) rhs -= r.coupling[k] * d.block(r.neighbors[k]);
    out.block(i) = f.at(i).solve(rhs);
  }
  return out;
}

inline StackedPoint damped_block_step(const BlockHessian& h, const StackedPoint& d, const StackedPoint& g) {
  return damped_block_step(DampedBlockFactors(h), h, d, g);
}

/// Per-round contraction factor (1/beta) / (1/beta + mu) of the damped solver.
inline double damped_contraction_bound(double beta, double mu) { return (1.0 / beta) / (1.0 / beta + mu); }

// ---------------------------------------------------------------------------
// Inner solve with residual control

enum class SolverMode { Jor, DampedBlock, DenseOracle };

enum class OmegaPolicy {
  SafeBound,  // omega_safety * jor_omega_bound(M, beta, w_bar)
  RowSum,     // omega_safety / max_r sum_c |H_rc| / D_rr, recomputed per outer iteration
  Fixed,      // the configured omega
};

struct SolverConfig {
  SolverMode mode = SolverMode::Jor;
  OmegaPolicy omega_policy = OmegaPolicy::RowSum;
  double omega = 1.0;          // used as-is with OmegaPolicy::Fixed
  double omega_safety = 0.95;  // factor applied to the SafeBound / RowSum value
  double big_m = 0.0;          // M for SafeBound; 0 means "take it from the local Hessians"
  double sigma_cap = 0.999;
  long max_inner_iters = 100000;
};

struct InnerSolveReport {
  long iterations = 0;
  double final_residual_inf = 0.0;
  std::int64_t scalars_sent = 0;
  std::int64_t scalar_ops = 0;
  double omega = 0.0;
};

/// 10 x inner_iteration_bound(eta_min, sigma_cap), capped at 1e5.
inline long default_max_inner_iters(double eta_min, double sigma_cap) {
  if (!(eta_min > 0.0) || !(eta_min < 1.0)) return 100000;
  const double b = 10.0 * std::ceil(std::log(eta_min) / std::log(sigma_cap));
  return static_cast<long>(std::min(100000.0, std::max(1.0, b)));
}

/// The relaxation parameter an inner solve will use on these blocks.
inline double resolve_omega(const SolverConfig& cfg, const BlockHessian& h) {
  switch (cfg.omega_policy) {
    case OmegaPolicy::Fixed:
      return cfg.omega;
    case OmegaPolicy::RowSum: {
      auto b = local_row_sum_bounds(h);
      return cfg.omega_safety / *std::max_element(b.begin(), b.end());
    }
    case OmegaPolicy::SafeBound: {
      double big_m = cfg.big_m;
      if (big_m <= 0.0) {
        for (int i = 0; i < h.nodes(); ++i) {
          Matrix local = h.row(i).diag_block;
          local.diagonal().array() -= (1.0 - h.row(i).self_weight) / h.beta();
          Eigen::SelfAdjointEigenSolver<Matrix> es(local, Eigen::EigenvaluesOnly);
          big_m = std::max(big_m, es.eigenvalues()(local.rows() - 1));
        }
      }
      double w_bar = 0.0;
      for (int i = 0; i < h.nodes(); ++i) w_bar = std::max(w_bar, h.row(i).self_weight);
      const double bound = jor_omega_bound(big_m, h.beta(), w_bar);
      if (bound <= 0.0 && h.nodes() > 1)
        throw NumericalError("JOR unusable: omega bound is 0 (w_bar = 1); use another solver mode");
      return h.nodes() == 1 ? cfg.omega_safety : cfg.omega_safety * bound;
    }
  }
  return cfg.omega;
}

namespace detail {

inline double max_block_residual(const BlockHessian& h, const StackedPoint& d, const StackedPoint& g,
                                 StackedPoint& residual) {
  double worst = 0.0;
  for (int i = 0; i < h.nodes(); ++i) {
    residual.block(i) = h.row_times(i, d) - g.block(i);
    worst = std::max(worst, residual.block_inf_norm(i));
  }
  return worst;
}

inline std::int64_t residual_ops(const BlockHessian& h) {
  std::int64_t s = 0;
  for (int i = 0; i < h.nodes(); ++i) s += ops::matvec(h.dim()) + (2 * h.degree(i) + 1) * h.dim();
  return s;
}

}  // namespace detail

/// Finds d with |H_i d - g_i|_inf <= eta_k |g|_inf at every node.
inline std::pair<StackedPoint, InnerSolveReport> inner_solve(const BlockHessian& h, const StackedPoint& g,
                                                             double eta_k, const SolverConfig& cfg,
                                                             const StackedPoint& d0) {
  require_dims(g.nodes() == h.nodes() && g.dim() == h.dim(), "inner_solve: gradient shape");
  require_dims(d0.nodes() == h.nodes() && d0.dim() == h.dim(), "inner_solve: initial guess shape");
  if (eta_k < 0.0 || eta_k >= 1.0) throw Error("inner_solve: eta_k must lie in [0, 1)");
  InnerSolveReport rep;
  const double target = eta_k * g.inf_norm();
  const Index n = h.dim();
  StackedPoint residual(h.nodes(), n);

  if (cfg.mode == SolverMode::DenseOracle) {
    Eigen::LLT<Matrix> llt(h.dense());
    if (llt.info() != Eigen::Success) throw NumericalError("dense oracle: Newton matrix is not positive definite");
    StackedPoint d(h.nodes(), n, llt.solve(g.values()));
    rep.final_residual_inf = detail::max_block_residual(h, d, g, residual);
    return {std::move(d), rep};
  }

  const std::int64_t round_messages = h.directed_edge_count() * n;
  StackedPoint d = d0;
  double res = detail::max_block_residual(h, d, g, residual);
  rep.scalar_ops += detail::residual_ops(h);
  double best = res;

  if (cfg.mode == SolverMode::Jor) {
    const double omega = resolve_omega(cfg, h);
    rep.omega = omega;
    for (int i = 0; i < h.nodes(); ++i)
      if ((h.row(i).diag.array() == 0.0).any())
        throw NumericalError("JOR diagonal breakdown at node " + std::to_string(i));
    while (res > target) {
      if (rep.iterations >= cfg.max_inner_iters)
        throw InnerSolverStalled("inner solver stalled after " + std::to_string(rep.iterations) +
                                     " JOR rounds (best residual " + std::to_string(best) + ")",
                                 best, rep.iterations);
      // residual = H d - g, so the JOR update is d - omega D^-1 residual
      for (int i = 0; i < h.nodes(); ++i)
        d.block(i) -= omega * residual.block(i).cwiseQuotient(h.row(i).diag);
      ++rep.iterations;
      rep.scalars_sent += round_messages;
      for (int i = 0; i < h.nodes(); ++i) rep.scalar_ops += ops::matvec(n) + ops::jor_round(h.degree(i), n);
      res = detail::max_block_residual(h, d, g, residual);
      best = std::min(best, res);
    }
  } else {
    const DampedBlockFactors factors(h);
    for (int i = 0; i < h.nodes(); ++i) rep.scalar_ops += ops::factorization(n);
    while (res > target) {
      if (rep.iterations >= cfg.max_inner_iters)
        throw InnerSolverStalled("inner solver stalled after " + std::to_string(rep.iterations) +
                                     " damped block rounds (best residual " + std::to_string(best) + ")",
                                 best, rep.iterations);
      d = damped_block_step(factors, h, d, g);
      ++rep.iterations;
      rep.scalars_sent += round_messages;
      for (int i = 0; i < h.nodes(); ++i)
        rep.scalar_ops += 2 * ops::triangular_solve(n) + (2 * h.degree(i) + 3) * n;
      res = detail::max_block_residual(h, d, g, residual);
      rep.scalar_ops += detail::residual_ops(h);
      best = std::min(best, res);
    }
  }
  rep.final_residual_inf = res;
  return {std::move(d), rep};
}

}  // namespace dinas
