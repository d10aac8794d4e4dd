#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "support.hpp"

using namespace dinas;
using dinas::test::path3;

TEST(Topology, RejectsSelfEdgesDuplicatesAndRange) {
  EXPECT_THROW(Topology(3, {{1, 1}}), TopologyError);
  EXPECT_THROW(Topology(3, {{0, 1}, {1, 0}}), TopologyError);
  EXPECT_THROW(Topology(3, {{0, 3}}), TopologyError);
  EXPECT_THROW(Topology(0, {}), TopologyError);
}

TEST(Topology, PathMetrics) {
  const Topology t = path3();
  EXPECT_TRUE(t.connected());
  EXPECT_EQ(t.diameter(), 2);
  EXPECT_EQ(t.degree(1), 2);
  EXPECT_EQ(t.directed_edge_count(), 4);
  EXPECT_FALSE(Topology(3, {{0, 1}}).connected());
}

TEST(Topology, EdgeListRoundTrip) {
  const Topology t = random_geometric_graph(8, 0.6, 3);
  std::stringstream ss;
  write_edge_list(ss, t);
  EXPECT_EQ(read_edge_list(ss), t);
}

TEST(RandomGeometricGraph, SingleNode) {
  const Topology t = random_geometric_graph(1, 0.3, 7);
  EXPECT_EQ(t.node_count(), 1);
  EXPECT_TRUE(t.edges().empty());
}

TEST(RandomGeometricGraph, DefaultRadiusIsConnected) {
  const Topology t = random_geometric_graph(10, std::sqrt(std::log(10.0) / 10.0), 1);
  EXPECT_EQ(t.node_count(), 10);
  EXPECT_TRUE(t.connected());
}

TEST(RandomGeometricGraph, LargeRadiusGivesCompleteGraph) {
  const Topology t = random_geometric_graph(3, 2.0, 5);
  EXPECT_EQ(t.edges().size(), 3u);
}

TEST(RandomGeometricGraph, SameSeedSameTopology) {
  for (std::uint64_t s = 0; s < 20; ++s)
    EXPECT_EQ(random_geometric_graph(12, default_radius(12), s), random_geometric_graph(12, default_radius(12), s));
}

TEST(RandomGeometricGraph, RetryCapNamesSeedAndRadius) {
  try {
    random_geometric_graph(30, 1e-4, 42);
    FAIL() << "expected a disconnected topology error";
  } catch (const TopologyError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("disconnected topology"), std::string::npos);
    EXPECT_NE(msg.find("42"), std::string::npos);
  }
}

TEST(Metropolis, PathWeights) {
  const ConsensusMatrix w = metropolis_weights(path3());
  EXPECT_DOUBLE_EQ(w.weight(0, 1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(w.weight(1, 2), 1.0 / 3.0);
  EXPECT_EQ(w.weight(0, 2), 0.0);
  EXPECT_DOUBLE_EQ(w.weight(0, 0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(w.weight(1, 1), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(w.weight(2, 2), 2.0 / 3.0);
}

TEST(Metropolis, SingleNodeAndPair) {
  const ConsensusMatrix one = metropolis_weights(Topology(1, {}));
  EXPECT_EQ(one.weight(0, 0), 1.0);
  const ConsensusMatrix two = dinas::test::pair_consensus();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_EQ(two.weight(i, j), 0.5);
}

TEST(Metropolis, InvariantsOnRandomTopologies) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const int n = 2 + static_cast<int>(s % 14);
    const ConsensusMatrix w = metropolis_weights(random_geometric_graph(n, default_radius(n) * 1.2, s));
    EXPECT_EQ(w.check_invariants(), "") << "seed " << s;
  }
}

TEST(Metropolis, DisconnectedTopologyRejected) {
  EXPECT_THROW(metropolis_weights(Topology(3, {{0, 1}})), TopologyError);
}

TEST(SpectralGap, PairMatrix) {
  const SpectralInfo s = spectral_gap(dinas::test::pair_consensus());
  EXPECT_NEAR(s.lambda2, 0.0, 1e-14);
  EXPECT_DOUBLE_EQ(s.w_bar, 0.5);
  EXPECT_FALSE(s.degenerate);
}

TEST(SpectralGap, SingleNodeIsDegenerate) {
  const SpectralInfo s = spectral_gap(metropolis_weights(Topology(1, {})));
  EXPECT_EQ(s.lambda2, 1.0);
  EXPECT_TRUE(s.degenerate);
}

TEST(SpectralGap, PathMatchesCharacteristicPolynomialRoot) {
  // W = [[2,1,0],[1,1,1],[0,1,2]] / 3 has eigenvalues 1, 2/3, 0; bisect det(W - xI) on [0.1, 0.9]
  const SpectralInfo s = spectral_gap(metropolis_weights(path3()));
  const Matrix w = metropolis_weights(path3()).weights();
  auto charpoly = [&](double x) { return (w - x * Matrix::Identity(3, 3)).determinant(); };
  double lo = 0.1, hi = 0.9;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if ((charpoly(lo) > 0) == (charpoly(mid) > 0)) lo = mid; else hi = mid;
  }
  EXPECT_NEAR(s.lambda2, 0.5 * (lo + hi), 1e-12);
  EXPECT_NEAR(s.lambda2, 2.0 / 3.0, 1e-12);
}

TEST(SpectralGap, StrictlyBelowOneWhenConnected) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const int n = 2 + static_cast<int>(s % 10);
    const SpectralInfo info = spectral_gap(metropolis_weights(random_geometric_graph(n, default_radius(n), s)));
    EXPECT_LT(info.lambda2, 1.0 - 1e-10) << "seed " << s;
  }
}

TEST(Dsf, SingleNode) {
  const DsfResult r = dsf_max({4.5}, Topology(1, {}));
  EXPECT_EQ(r.max, 4.5);
  EXPECT_EQ(r.rounds, 0);
  EXPECT_EQ(r.scalars_sent, 0);
}

TEST(Dsf, PathFloodsInDiameterRounds) {
  const DsfResult r = dsf_max({3.0, 1.0, 2.0}, path3());
  EXPECT_EQ(r.max, 3.0);
  EXPECT_LE(r.rounds, 2);
}

TEST(Dsf, PathMessageCountByHand) {
  // round 1: 0->1 {v0}, 1->0 {v1}, 1->2 {v1}, 2->1 {v2}: 4 scalars
  // round 2: 1->0 {v2}, 1->2 {v0}: 2 scalars
  const DsfResult r = dsf_max({0.0, 1.0, 2.0}, path3());
  EXPECT_EQ(r.rounds, 2);
  EXPECT_EQ(r.scalars_sent, 6);
}

TEST(Dsf, MatchesDirectMaxOnRandomDraws) {
  SeedStream rng(99);
  for (int draw = 0; draw < 1000; ++draw) {
    const int n = 1 + static_cast<int>(rng.next_u64() % 12);
    const Topology t = random_geometric_graph(n, default_radius(std::max(n, 2)) * 1.3, rng.next_u64());
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-10.0, 10.0);
    const DsfResult r = dsf_max(v, t);
    ASSERT_EQ(r.max, *std::max_element(v.begin(), v.end()));
    ASSERT_LE(r.rounds, t.diameter());
  }
}

TEST(CostConventions, TotalCostExamples) {
  EXPECT_EQ(total_cost({100, 10}, 1.0), 110.0);
  EXPECT_EQ(total_cost({100, 10}, 0.0), 100.0);
  EXPECT_EQ(total_cost({0, 10}, 10.0), 100.0);
}

TEST(CostConventions, TableEntries) {
  EXPECT_EQ(ops::jor_round(2, 10), 70 + 10);
  EXPECT_EQ(ops::factorization(10), 333);
  EXPECT_EQ(ops::dot(0), 0);
  EXPECT_EQ(ops::axpy(0), 0);
  EXPECT_FALSE(ops::conventions().empty());
}
