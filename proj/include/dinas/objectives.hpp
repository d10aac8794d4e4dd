#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dinas/common.hpp"
#include "dinas/cost.hpp"
#include "dinas/network.hpp"

namespace dinas {

/// A twice differentiable, strongly convex local cost f_i : R^n -> R.
class LocalCost {
 public:
  virtual ~LocalCost() = default;

  virtual Index dimension() const = 0;
  virtual double value(const Eigen::Ref<const Vector>& y) const = 0;
  virtual Vector gradient(const Eigen::Ref<const Vector>& y) const = 0;
  virtual Matrix hessian(const Eigen::Ref<const Vector>& y) const = 0;

  /// True when the Hessian does not depend on y (quadratics).
  virtual bool constant_hessian() const { return false; }

  // scalar-operation counts for one evaluation, see dinas::ops
  virtual std::int64_t value_ops() const = 0;
  virtual std::int64_t gradient_ops() const = 0;
  virtual std::int64_t hessian_ops() const = 0;
};

using CostPtr = std::shared_ptr<const LocalCost>;
using CostList = std::vector<CostPtr>;

/// ln(1 + exp(-t)) without overflow.
inline double log1p_exp_neg(double t) {
  return t >= 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

/// 1 / (1 + exp(t)), i.e. sigmoid(-t), without overflow.
inline double sigmoid_neg(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

/// sum_j ln(1 + exp(-b_j a_j.y)) + (rho/2) |y|^2
class LogisticCost final : public LocalCost {
 public:
  LogisticCost(Matrix points, Vector labels, double rho)
      : points_(std::move(points)), labels_(std::move(labels)), rho_(rho) {
    require_dims(points_.rows() == labels_.size(), "logistic: one label per data point");
    if (!(rho_ > 0.0)) throw Error("logistic: rho must be positive");
    for (Index j = 0; j < labels_.size(); ++j)
      if (labels_(j) != 1.0 && labels_(j) != -1.0) throw Error("logistic: labels must be +1 or -1");
  }

  Index dimension() const override { return points_.cols(); }
  double rho() const { return rho_; }
  const Matrix& points() const { return points_; }
  const Vector& labels() const { return labels_; }

  double value(const Eigen::Ref<const Vector>& y) const override {
    check(y);
    const Vector t = labels_.cwiseProduct(points_ * y);
    double v = 0.0;
    for (Index j = 0; j < t.size(); ++j) v += log1p_exp_neg(t(j));
    return v + 0.5 * rho_ * y.squaredNorm();
  }

  Vector gradient(const Eigen::Ref<const Vector>& y) const override {
    check(y);
    const Vector t = labels_.cwiseProduct(points_ * y);
    Vector c(t.size());
    for (Index j = 0; j < t.size(); ++j) c(j) = -labels_(j) * sigmoid_neg(t(j));
    return points_.transpose() * c + rho_ * y;
  }

  Matrix hessian(const Eigen::Ref<const Vector>& y) const override {
    check(y);
    const Vector t = labels_.cwiseProduct(points_ * y);
    Vector s(t.size());
    for (Index j = 0; j < t.size(); ++j) {
      const double p = sigmoid_neg(t(j));
      s(j) = p * (1.0 - p);
    }
    Matrix h = points_.transpose() * s.asDiagonal() * points_;
    h.diagonal().array() += rho_;
    return 0.5 * (h + h.transpose());
  }

  std::int64_t value_ops() const override { return m() * (n() + 2) + n(); }
  std::int64_t gradient_ops() const override { return m() * (2 * n() + 3) + n(); }
  std::int64_t hessian_ops() const override { return m() * (n() + 3) + m() * n() * (n() + 1) / 2 + n(); }

 private:
  std::int64_t m() const { return points_.rows(); }
  std::int64_t n() const { return points_.cols(); }
  void check(const Eigen::Ref<const Vector>& y) const {
    require_dims(y.size() == points_.cols(), "logistic: argument dimension");
  }

  Matrix points_;
  Vector labels_;
  double rho_;
};

/// y^T A y + y^T b. No 1/2 factor: the Hessian is 2A.
class QuadraticCost final : public LocalCost {
 public:
  QuadraticCost(Matrix a, Vector b) : a_(std::move(a)), b_(std::move(b)) {
    require_dims(a_.rows() == a_.cols(), "quadratic: A must be square");
    require_dims(a_.rows() == b_.size(), "quadratic: b length");
    const double scale = std::max(1.0, a_.cwiseAbs().maxCoeff());
    if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw Error("quadratic: A is not symmetric");
  }

  Index dimension() const override { return b_.size(); }
  const Matrix& a() const { return a_; }
  const Vector& b() const { return b_; }

  double value(const Eigen::Ref<const Vector>& y) const override {
    require_dims(y.size() == b_.size(), "quadratic: argument dimension");
    return y.dot(a_ * y) + y.dot(b_);
  }
  Vector gradient(const Eigen::Ref<const Vector>& y) const override {
    require_dims(y.size() == b_.size(), "quadratic: argument dimension");
    return 2.0 * (a_ * y) + b_;
  }
  Matrix hessian(const Eigen::Ref<const Vector>&) const override { return 2.0 * a_; }
  bool constant_hessian() const override { return true; }

  std::int64_t value_ops() const override { return n() * n() + 2 * n(); }
  std::int64_t gradient_ops() const override { return n() * n() + n(); }
  std::int64_t hessian_ops() const override { return 0; }

 private:
  std::int64_t n() const { return b_.size(); }
  Matrix a_;
  Vector b_;
};

/// f = sum_i f_i, the centralized cost.
class SumCost final : public LocalCost {
 public:
  explicit SumCost(CostList parts) : parts_(std::move(parts)) {
    if (parts_.empty()) throw Error("sum cost needs at least one term");
    for (const auto& p : parts_)
      require_dims(p->dimension() == parts_.front()->dimension(), "sum cost: term dimensions");
  }

  Index dimension() const override { return parts_.front()->dimension(); }
  double value(const Eigen::Ref<const Vector>& y) const override {
    double v = 0.0;
    for (const auto& p : parts_) v += p->value(y);
    return v;
  }
  Vector gradient(const Eigen::Ref<const Vector>& y) const override {
    Vector g = Vector::Zero(dimension());
    for (const auto& p : parts_) g += p->gradient(y);
    return g;
  }
  Matrix hessian(const Eigen::Ref<const Vector>& y) const override {
    Matrix h = Matrix::Zero(dimension(), dimension());
    for (const auto& p : parts_) h += p->hessian(y);
    return h;
  }
  bool constant_hessian() const override {
    return std::all_of(parts_.begin(), parts_.end(), [](const CostPtr& p) { return p->constant_hessian(); });
  }
  std::int64_t value_ops() const override { return sum([](const LocalCost& c) { return c.value_ops(); }); }
  std::int64_t gradient_ops() const override { return sum([](const LocalCost& c) { return c.gradient_ops(); }); }
  std::int64_t hessian_ops() const override { return sum([](const LocalCost& c) { return c.hessian_ops(); }); }

 private:
  template <class F>
  std::int64_t sum(F f) const {
    std::int64_t s = 0;
    for (const auto& p : parts_) s += f(*p);
    return s;
  }
  CostList parts_;
};

inline CostPtr make_logistic(Matrix points, Vector labels, double rho) {
  return std::make_shared<LogisticCost>(std::move(points), std::move(labels), rho);
}

inline CostPtr make_quadratic(Matrix a, Vector b) {
  return std::make_shared<QuadraticCost>(std::move(a), std::move(b));
}

// ---------------------------------------------------------------------------
// Problem generators

/// Random orthogonal matrix: Q from the QR factorization of a Gaussian matrix,
/// columns sign-fixed so that R has a positive diagonal.
inline Matrix random_orthogonal(Index n, SeedStream& rng) {
  Matrix g(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

/// A_i = P_i D_i P_i^T with diag(D_i) ~ U[lambda_min, lambda_max], b_i ~ U[0,1]^n.
inline CostList generate_quadratic_family(Index n, int n_nodes, double lambda_min, double lambda_max,
                                          std::uint64_t rng_seed) {
  if (!(lambda_min > 0.0) || lambda_max < lambda_min)
    throw Error("quadratic family: need 0 < lambda_min <= lambda_max");
  SeedStream root = SeedStream(rng_seed).split("quadratic-family");
  CostList out;
  for (int i = 0; i < n_nodes; ++i) {
    SeedStream rng = root.split("node-" + std::to_string(i));
    Vector d(n);
    for (Index j = 0; j < n; ++j) d(j) = rng.uniform(lambda_min, lambda_max);
    Matrix p = random_orthogonal(n, rng);
    Matrix a;
    if (lambda_min == lambda_max) {
      // P (cI) P^T = cI; built directly so the isotropic case is exact
      a = Matrix::Identity(n, n) * lambda_min;
    } else {
      a = p * d.asDiagonal() * p.transpose();
      a = 0.5 * (a + a.transpose()).eval();
    }
    Vector b(n);
    for (Index j = 0; j < n; ++j) b(j) = rng.uniform();
    out.push_back(make_quadratic(std::move(a), std::move(b)));
  }
  return out;
}

struct Dataset {
  Matrix features;  // m x n
  Vector labels;    // m, entries +-1
};

/// Features ~ U(0,1), labels +-1 with equal probability.
inline Dataset generate_logistic_dataset(Index n, Index m, std::uint64_t rng_seed) {
  SeedStream rng = SeedStream(rng_seed).split("logistic-data");
  Dataset ds{Matrix(m, n), Vector(m)};
  for (Index j = 0; j < m; ++j) {
    for (Index c = 0; c < n; ++c) ds.features(j, c) = rng.uniform_open();
    ds.labels(j) = rng.coin() ? 1.0 : -1.0;
  }
  return ds;
}

/// Node i receives the contiguous rows [i m/N, (i+1) m/N). Every local cost
/// uses rho = 0.01 m with the global m unless `rho` is given.
inline CostList partition_logistic(const Dataset& ds, int n_nodes, double rho = -1.0) {
  const Index m = ds.features.rows();
  if (n_nodes < 1 || m % n_nodes != 0)
    throw Error("logistic partition: " + std::to_string(m) + " points are not divisible among " +
                std::to_string(n_nodes) + " nodes");
  if (rho <= 0.0) rho = 0.01 * static_cast<double>(m);
  const Index per = m / n_nodes;
  CostList out;
  for (int i = 0; i < n_nodes; ++i)
    out.push_back(make_logistic(ds.features.middleRows(i * per, per), ds.labels.segment(i * per, per), rho));
  return out;
}

inline CostList generate_logistic_partition(Index n, Index m, int n_nodes, std::uint64_t rng_seed) {
  if (n_nodes < 1 || m % n_nodes != 0)
    throw Error("logistic partition: " + std::to_string(m) + " points are not divisible among " +
                std::to_string(n_nodes) + " nodes");
  return partition_logistic(generate_logistic_dataset(n, m, rng_seed), n_nodes);
}

/// CSV rows: feature columns then a final +-1 label. A non-numeric first row
/// is treated as a header.
inline Dataset load_csv_dataset(std::istream& is) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
      if (!numeric) break;
    }
    if (!numeric) {
      if (rows.empty() && lineno == 1) continue;  // header
      throw Error("csv line " + std::to_string(lineno) + ": non-numeric cell");
    }
    if (row.size() < 2) throw Error("csv line " + std::to_string(lineno) + ": need features and a label");
    if (!rows.empty() && row.size() != rows.front().size())
      throw Error("csv line " + std::to_string(lineno) + ": column count differs from first row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("csv dataset is empty");
  const Index m = static_cast<Index>(rows.size());
  const Index n = static_cast<Index>(rows.front().size()) - 1;
  Dataset ds{Matrix(m, n), Vector(m)};
  for (Index j = 0; j < m; ++j) {
    for (Index c = 0; c < n; ++c) ds.features(j, c) = rows[j][c];
    const double lab = rows[j][n];
    if (lab != 1.0 && lab != -1.0)
      throw Error("csv row " + std::to_string(j + 1) + ": label must be +1 or -1");
    ds.labels(j) = lab;
  }
  return ds;
}

inline Dataset load_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset " + path);
  return load_csv_dataset(in);
}

// ---------------------------------------------------------------------------
// Stacked points and the penalty objective

/// x = (x_1, ..., x_N), each block in R^n.
class StackedPoint {
 public:
  StackedPoint() = default;
  StackedPoint(int nodes, Index dim) : nodes_(nodes), dim_(dim), values_(Vector::Zero(nodes * dim)) {}
  StackedPoint(int nodes, Index dim, Vector values) : nodes_(nodes), dim_(dim), values_(std::move(values)) {
    require_dims(values_.size() == nodes_ * dim_, "stacked point size");
  }

  int nodes() const noexcept { return nodes_; }
  Index dim() const noexcept { return dim_; }
  auto block(int i) { return values_.segment(i * dim_, dim_); }
  auto block(int i) const { return values_.segment(i * dim_, dim_); }

  /// Every block equal to y.
  static StackedPoint replicate(int nodes, const Vector& y) {
    return StackedPoint(nodes, y.size(), y.replicate(nodes, 1));
  }
  Vector& values() noexcept { return values_; }
  const Vector& values() const noexcept { return values_; }

  double inf_norm() const { return dinas::inf_norm(values_); }
  double block_inf_norm(int i) const { return dinas::inf_norm(block(i)); }

 private:
  int nodes_ = 0;
  Index dim_ = 0;
  Vector values_;
};

struct ProblemConstants {
  double mu = 0.0;
  double big_m = 0.0;
  double lip_hess = 0.0;  // L; exactly 0 for constant-Hessian costs
};

/// Phi_beta(x) = sum_i f_i(x_i) + (1/2 beta) x^T (I - W (x) I_n) x
class PenaltyProblem {
 public:
  PenaltyProblem(CostList costs, double beta, ConsensusMatrix consensus)
      : costs_(std::move(costs)), beta_(beta), consensus_(std::move(consensus)) {
    if (!(beta_ > 0.0)) throw Error("penalty problem: beta must be positive");
    require_dims(static_cast<int>(costs_.size()) == consensus_.node_count(),
                 "penalty problem: one cost per node");
    for (const auto& c : costs_)
      require_dims(c->dimension() == costs_.front()->dimension(), "penalty problem: cost dimensions");
  }

  int nodes() const { return consensus_.node_count(); }
  Index dim() const { return costs_.front()->dimension(); }
  double beta() const { return beta_; }
  const CostList& costs() const { return costs_; }
  const LocalCost& cost(int i) const { return *costs_.at(i); }
  const ConsensusMatrix& consensus() const { return consensus_; }
  const Topology& topology() const { return consensus_.topology(); }

  PenaltyProblem with_beta(double beta) const { return PenaltyProblem(costs_, beta, consensus_); }

  void check(const StackedPoint& x) const {
    require_dims(x.nodes() == nodes() && x.dim() == dim(), "stacked point does not match the problem");
  }

  /// (1-w_ii) x_i - sum_{j in O_i} w_ij x_j
  Vector disagreement(const StackedPoint& x, int i) const {
    Vector v = (1.0 - consensus_.self_weight(i)) * x.block(i);
    for (int j : topology().neighbors(i)) v -= consensus_.weight(i, j) * x.block(j);
    return v;
  }

  /// Local gradient block g_i; needs only x_i and the neighbours' blocks.
  Vector node_gradient(const StackedPoint& x, int i) const {
    return costs_[i]->gradient(x.block(i)) + disagreement(x, i) / beta_;
  }

 private:
  CostList costs_;
  double beta_;
  ConsensusMatrix consensus_;
};

/// (1/2 beta) x^T (I - W) x evaluated node-wise.
inline double penalty_term(const PenaltyProblem& p, const StackedPoint& x) {
  p.check(x);
  double q = 0.0;
  for (int i = 0; i < p.nodes(); ++i) q += x.block(i).dot(p.disagreement(x, i));
  return q / (2.0 * p.beta());
}

inline double penalty_value(const PenaltyProblem& p, const StackedPoint& x) {
  p.check(x);
  double v = 0.0;
  for (int i = 0; i < p.nodes(); ++i) v += p.cost(i).value(x.block(i));
  return v + penalty_term(p, x);
}

inline StackedPoint penalty_gradient(const PenaltyProblem& p, const StackedPoint& x) {
  p.check(x);
  StackedPoint g(p.nodes(), p.dim());
  for (int i = 0; i < p.nodes(); ++i) g.block(i) = p.node_gradient(x, i);
  return g;
}

// ---------------------------------------------------------------------------
// Constants and reference solutions

struct SampleBox {
  Vector lower;
  Vector upper;
};

/// Axis-aligned box containing every point, widened by `margin` on each side.
inline SampleBox box_around(const std::vector<Vector>& points, double margin) {
  if (points.empty()) throw Error("box_around: no points");
  SampleBox box{points.front(), points.front()};
  for (const auto& p : points) {
    box.lower = box.lower.cwiseMin(p);
    box.upper = box.upper.cwiseMax(p);
  }
  box.lower.array() -= margin;
  box.upper.array() += margin;
  return box;
}

/// mu, M from Hessian spectra at sampled points; L from sampled pairs in the
/// inf-norm. Constant-Hessian costs contribute L = 0.
inline ProblemConstants estimate_constants(const CostList& costs, const SampleBox& box, int n_samples,
                                           std::uint64_t rng_seed) {
  if (n_samples < 1) throw Error("estimate_constants: n_samples must be >= 1");
  if (costs.empty()) throw Error("estimate_constants: no costs");
  const Index n = costs.front()->dimension();
  require_dims(box.lower.size() == n && box.upper.size() == n, "estimate_constants: box dimension");
  SeedStream rng = SeedStream(rng_seed).split("constants");
  auto draw = [&] {
    Vector y(n);
    for (Index j = 0; j < n; ++j) y(j) = rng.uniform(box.lower(j), box.upper(j));
    return y;
  };
  ProblemConstants c;
  c.mu = std::numeric_limits<double>::infinity();
  c.big_m = 0.0;
  c.lip_hess = 0.0;
  const double width = std::max(1e-3, (box.upper - box.lower).maxCoeff());
  for (const auto& cost : costs) {
    std::vector<Vector> samples;
    std::vector<Matrix> hessians;
    for (int s = 0; s < n_samples; ++s) {
      samples.push_back(draw());
      hessians.push_back(cost->hessian(samples.back()));
      Eigen::SelfAdjointEigenSolver<Matrix> es(hessians.back(), Eigen::EigenvaluesOnly);
      c.mu = std::min(c.mu, es.eigenvalues()(0));
      c.big_m = std::max(c.big_m, es.eigenvalues()(n - 1));
      if (cost->constant_hessian()) break;
    }
    if (cost->constant_hessian()) continue;
    auto ratio = [](const Matrix& ha, const Matrix& hb, const Vector& a, const Vector& b) {
      const double dy = inf_norm(a - b);
      if (dy == 0.0) return 0.0;
      return (ha - hb).cwiseAbs().rowwise().sum().maxCoeff() / dy;
    };
    for (int s = 0; s + 1 < n_samples; ++s)
      c.lip_hess = std::max(c.lip_hess, ratio(hessians[s], hessians[s + 1], samples[s], samples[s + 1]));
    // short-range pairs pick up local curvature changes the long pairs average out
    for (int s = 0; s < n_samples; ++s) {
      Vector z = samples[s];
      for (Index j = 0; j < n; ++j) z(j) += 1e-3 * width * (2.0 * rng.uniform() - 1.0);
      c.lip_hess = std::max(c.lip_hess, ratio(hessians[s], cost->hessian(z), samples[s], z));
    }
  }
  return c;
}

/// Minimizer of sum_i f_i. Constant Hessians are solved directly; otherwise a
/// damped Newton method with Armijo backtracking runs to |grad|_inf <= tol.
inline Vector reference_solution(const CostList& costs, double tol = 1e-10, int max_iters = 200) {
  SumCost f(costs);
  const Index n = f.dimension();
  Vector y = Vector::Zero(n);
  if (f.constant_hessian()) {
    const Matrix h = f.hessian(y);
    Eigen::LLT<Matrix> llt(h);
    if (llt.info() != Eigen::Success) throw NumericalError("reference_solution: Hessian is not positive definite");
    y = -llt.solve(f.gradient(y));
    // one refinement step
    y -= llt.solve(f.gradient(y));
    return y;
  }
  for (int it = 0; it < max_iters; ++it) {
    const Vector g = f.gradient(y);
    if (inf_norm(g) <= tol) return y;
    Eigen::LLT<Matrix> llt(f.hessian(y));
    if (llt.info() != Eigen::Success) throw NumericalError("reference_solution: Hessian is not positive definite");
    const Vector d = llt.solve(g);
    Vector trial = y - d;
    // in the local regime the full step halves the gradient; value tests are
    // unreliable there because f changes below machine precision
    if (inf_norm(f.gradient(trial)) > 0.5 * inf_norm(g)) {
      const double f0 = f.value(y);
      const double slope = g.dot(d);
      double t = 1.0;
      while (f.value(trial) > f0 - 1e-4 * t * slope && t > 1e-12) {
        t *= 0.5;
        trial = y - t * d;
      }
      if (t <= 1e-12) break;
    }
    y = trial;
  }
  if (inf_norm(f.gradient(y)) <= tol) return y;
  throw NumericalError("reference_solution: oracle iteration cap exceeded (|grad|_inf = " +
                       std::to_string(inf_norm(f.gradient(y))) + ")");
}

}  // namespace dinas
