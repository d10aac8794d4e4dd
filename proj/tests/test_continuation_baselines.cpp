#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace dinas;

namespace {

struct DeskQuadratic {
  CostList costs = generate_quadratic_family(10, 5, 0.1, 10.0, 11);
  ConsensusMatrix w = dinas::test::desk_consensus(5, 1);
  Vector y_star = reference_solution(costs);
  ProblemConstants c = experiment_constants(costs, y_star, 11);
};

SdinasOptions stage_options(const DeskQuadratic& q, int stages, double target) {
  SdinasOptions o;
  o.schedule = {0.1, 1e-3, 0.1, stages};
  o.dinas.max_outer = 5000;
  o.dinas.schedule = {0.1, 1.0};
  o.y_star = q.y_star;
  o.target_error = target;
  return o;
}

CostList identical_costs(int nodes, const Matrix& a, const Vector& b) {
  CostList out;
  for (int i = 0; i < nodes; ++i) out.push_back(make_quadratic(a, b));
  return out;
}

}  // namespace

TEST(ConsensusError, Examples) {
  const Vector e1 = (Vector(2) << 1.0, 0.0).finished();
  EXPECT_EQ(consensus_error(StackedPoint::replicate(3, e1), e1), 0.0);
  EXPECT_DOUBLE_EQ(consensus_error(StackedPoint(4, 2), e1), 1.0);
  StackedPoint x(2, 2);
  x.block(0) = 2.0 * e1;
  EXPECT_DOUBLE_EQ(consensus_error(x, e1), 1.0);
  EXPECT_THROW(consensus_error(x, Vector::Zero(2)), Error);
}

TEST(MaxBlockDistance, Value) {
  StackedPoint x(2, 2);
  x.block(1) = (Vector(2) << 3.0, 4.0).finished();
  EXPECT_DOUBLE_EQ(max_block_distance(x, Vector::Zero(2)), 5.0);
}

TEST(Sdinas, OptimalStartTakesNoIterations) {
  const CostList costs = identical_costs(5, Matrix::Identity(3, 3), Vector::Zero(3));
  SdinasOptions opt;
  opt.schedule.max_stages = 4;
  const StagedRunResult r = sdinas_run(costs, dinas::test::desk_consensus(5, 1), StackedPoint(5, 3), opt);
  ASSERT_EQ(r.stages.size(), 4u);
  for (const auto& s : r.stages) {
    EXPECT_EQ(s.outer_iters, 0);
    EXPECT_TRUE(s.converged);
  }
  EXPECT_TRUE(r.combined.records.empty());
}

TEST(Sdinas, ScheduleShrinksBetaAndEps) {
  const DeskQuadratic q;
  const StagedRunResult r = sdinas_run(q.costs, q.w, StackedPoint(5, 10), stage_options(q, 3, 0.0));
  ASSERT_EQ(r.stages.size(), 3u);
  for (std::size_t s = 0; s < r.stages.size(); ++s) {
    EXPECT_NEAR(r.stages[s].beta, 0.1 * std::pow(0.1, s), 1e-15);
    EXPECT_NEAR(r.stages[s].eps, 1e-3 * std::pow(0.1, s), 1e-18);
    EXPECT_LE(r.stages[s].regrad_inf, r.stages[s].eps);
    if (s > 0) {
      EXPECT_GE(r.stages[s].ledger.scalar_ops, r.stages[s - 1].ledger.scalar_ops);
      EXPECT_LE(r.stages[s].max_distance, r.stages[s - 1].max_distance);
    }
  }
}

TEST(Sdinas, ProximityShrinksByTheta) {
  const DeskQuadratic q;
  const StagedRunResult r = sdinas_run(q.costs, q.w, StackedPoint(5, 10), stage_options(q, 2, 0.0));
  ASSERT_EQ(r.stages.size(), 2u);
  const double ratio = r.stages[1].max_distance / r.stages[0].max_distance;
  EXPECT_GT(ratio, 0.05);
  EXPECT_LT(ratio, 0.2);
}

TEST(Sdinas, ReachesConsensusTarget) {
  const DeskQuadratic q;
  const StagedRunResult r = sdinas_run(q.costs, q.w, StackedPoint(5, 10), stage_options(q, 8, 1e-4));
  EXPECT_TRUE(r.reached_target);
  EXPECT_TRUE(r.combined.converged);
  EXPECT_LE(consensus_error(r.x, q.y_star), 1e-4);
  // the combined trace numbers iterations globally
  for (std::size_t k = 0; k < r.combined.records.size(); ++k) EXPECT_EQ(r.combined.records[k].k, static_cast<int>(k));
}

TEST(Sdinas, StageNonConvergenceNamesStage) {
  const DeskQuadratic q;
  SdinasOptions opt = stage_options(q, 3, 0.0);
  opt.dinas.max_outer = 1;
  try {
    sdinas_run(q.costs, q.w, StackedPoint(5, 10), opt);
    FAIL() << "expected non-convergence";
  } catch (const NonConvergence& e) {
    EXPECT_NE(std::string(e.what()).find("stage 1"), std::string::npos);
  }
}

TEST(Sdinas, InvalidScheduleRejected) {
  const DeskQuadratic q;
  SdinasOptions opt;
  opt.schedule.theta = 1.0;
  EXPECT_THROW(sdinas_run(q.costs, q.w, StackedPoint(5, 10), opt), Error);
  opt = SdinasOptions{};
  opt.target_error = 1e-4;
  EXPECT_THROW(sdinas_run(q.costs, q.w, StackedPoint(5, 10), opt), Error);
}

TEST(Baselines, Names) {
  EXPECT_STREQ(to_string(BaselineMethod::DG), "dg");
  EXPECT_STREQ(to_string(BaselineMethod::Extra), "extra");
  EXPECT_STREQ(to_string(BaselineMethod::DIGing), "diging");
}

TEST(Baselines, DefaultStep) {
  const ConsensusMatrix w = dinas::test::pair_consensus();
  // lambda_min of [[.5,.5],[.5,.5]] is 0
  EXPECT_NEAR(default_baseline_step(w, 4.0, 0.5), 0.125, 1e-14);
  EXPECT_THROW(default_baseline_step(w, 0.0, 0.5), Error);
}

TEST(Baselines, ImmediateTerminationAtMinimizer) {
  const CostList costs = identical_costs(3, Matrix::Identity(2, 2), Vector::Zero(2));
  const ConsensusMatrix w = metropolis_weights(dinas::test::path3());
  for (BaselineMethod m : {BaselineMethod::DG, BaselineMethod::Extra, BaselineMethod::DIGing}) {
    BaselineConfig cfg;
    cfg.method = m;
    const RunResult r = baseline_run(costs, w, StackedPoint(3, 2), cfg, 0.1);
    EXPECT_TRUE(r.converged);
    EXPECT_TRUE(r.records.empty());
  }
}

TEST(Baselines, IdenticalCostsKeepConsensus) {
  const Matrix a = (Matrix(2, 2) << 2.0, 0.3, 0.3, 1.0).finished();
  const CostList costs = identical_costs(5, a, (Vector(2) << 1.0, -1.0).finished());
  const ConsensusMatrix w = dinas::test::desk_consensus(5, 1);
  const StackedPoint x0 = StackedPoint::replicate(5, (Vector(2) << 0.7, -0.2).finished());
  for (BaselineMethod m : {BaselineMethod::DG, BaselineMethod::Extra, BaselineMethod::DIGing}) {
    BaselineConfig cfg;
    cfg.method = m;
    cfg.max_iters = 30;
    cfg.tol_grad = 0.0;
    const RunResult r = baseline_run(costs, w, x0, cfg, 0.1);
    for (int i = 1; i < 5; ++i) EXPECT_LT(inf_norm(r.x.block(i) - r.x.block(0)), 1e-14) << to_string(m);
  }
}

TEST(Baselines, MessageCountsLinearInRounds) {
  const CostList costs = generate_quadratic_family(3, 3, 1.0, 2.0, 4);
  const ConsensusMatrix w = metropolis_weights(dinas::test::path3());
  for (BaselineMethod m : {BaselineMethod::DG, BaselineMethod::Extra, BaselineMethod::DIGing}) {
    BaselineConfig cfg;
    cfg.method = m;
    cfg.max_iters = 7;
    cfg.tol_grad = 0.0;
    const RunResult r = baseline_run(costs, w, StackedPoint(3, 3), cfg, 0.1);
    ASSERT_EQ(r.records.size(), 7u);
    // path 0-1-2: four directed edges, three scalars each
    const std::int64_t per_round = 4 * 3 * (m == BaselineMethod::DIGing ? 2 : 1);
    for (const auto& rec : r.records) {
      EXPECT_EQ(rec.ledger.scalars_sent, (rec.k + 1) * per_round);
      EXPECT_EQ(rec.condition, Acceptance::None);
      EXPECT_EQ(rec.inner_iterations, 0);
    }
  }
}

TEST(Baselines, DigingReachesReference) {
  const DeskQuadratic q;
  BaselineConfig cfg;
  cfg.method = BaselineMethod::DIGing;
  const RunResult r = baseline_run(q.costs, q.w, StackedPoint(5, 10), cfg, default_baseline_step(q.w, q.c.big_m, 0.5),
                                   q.y_star);
  ASSERT_TRUE(r.converged);
  EXPECT_LE(r.records.back().consensus_error, 1e-4);
  // e <= 1e-4 only bounds the distance by 1e-2 |y*|; keep iterating for the 1e-3 check
  cfg.tol_error = 1e-12;
  const RunResult tight = baseline_run(q.costs, q.w, StackedPoint(5, 10), cfg,
                                       default_baseline_step(q.w, q.c.big_m, 0.5), q.y_star);
  ASSERT_TRUE(tight.converged);
  for (int i = 0; i < 5; ++i) EXPECT_LT((tight.x.block(i) - q.y_star).norm(), 1e-3);
}

TEST(Baselines, ExtraReachesReference) {
  const DeskQuadratic q;
  BaselineConfig cfg;
  cfg.method = BaselineMethod::Extra;
  const RunResult r = baseline_run(q.costs, q.w, StackedPoint(5, 10), cfg, default_baseline_step(q.w, q.c.big_m, 0.5),
                                   q.y_star);
  EXPECT_TRUE(r.converged);
}

TEST(Baselines, DgStallsAtErrorFloor) {
  const DeskQuadratic q;
  BaselineConfig cfg;
  cfg.method = BaselineMethod::DG;
  cfg.max_iters = 20000;
  cfg.tol_error = 1e-12;
  const RunResult r = baseline_run(q.costs, q.w, StackedPoint(5, 10), cfg, default_baseline_step(q.w, q.c.big_m, 0.5),
                                   q.y_star);
  EXPECT_FALSE(r.converged);
  EXPECT_FALSE(r.diverged);
  const double late = r.records.back().consensus_error;
  const double earlier = r.records[r.records.size() - 5000].consensus_error;
  EXPECT_GT(late, 1e-8);
  EXPECT_NEAR(late, earlier, 1e-3 * earlier);
}

TEST(Baselines, DivergenceFlagged) {
  const DeskQuadratic q;
  BaselineConfig cfg;
  cfg.method = BaselineMethod::DG;
  const RunResult r = baseline_run(q.costs, q.w, StackedPoint(5, 10), cfg, 50.0 / q.c.big_m);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.converged);
}

TEST(Baselines, RejectsBadInputs) {
  const DeskQuadratic q;
  BaselineConfig cfg;
  EXPECT_THROW(baseline_run(q.costs, q.w, StackedPoint(5, 10), cfg, 0.0), Error);
  EXPECT_THROW(baseline_run(q.costs, q.w, StackedPoint(5, 10), cfg, 0.1, Vector(Vector::Zero(10))), Error);
}
