#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dinas/common.hpp"

namespace dinas {

/// Undirected simple graph on nodes 0..N-1. Self-loops are implicit and never
/// stored; edges are kept as sorted (i < j) pairs.
class Topology {
 public:
  Topology() = default;

  Topology(int node_count, std::vector<std::pair<int, int>> edges) : node_count_(node_count) {
    if (node_count < 1) throw TopologyError("topology needs at least one node");
    std::set<std::pair<int, int>> seen;
    for (auto [a, b] : edges) {
      if (a < 0 || b < 0 || a >= node_count || b >= node_count)
        throw TopologyError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                            ") references a node outside 0.." + std::to_string(node_count - 1));
      if (a == b) throw TopologyError("explicit self-edge at node " + std::to_string(a));
      auto e = std::minmax(a, b);
      if (!seen.insert({e.first, e.second}).second)
        throw TopologyError("duplicate edge (" + std::to_string(e.first) + "," +
                            std::to_string(e.second) + ")");
    }
    edges_.assign(seen.begin(), seen.end());
    neighbors_.assign(static_cast<std::size_t>(node_count), {});
    for (auto [a, b] : edges_) {
      neighbors_[a].push_back(b);
      neighbors_[b].push_back(a);
    }
    for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
  }

  int node_count() const noexcept { return node_count_; }
  const std::vector<std::pair<int, int>>& edges() const noexcept { return edges_; }
  const std::vector<int>& neighbors(int i) const { return neighbors_.at(i); }
  int degree(int i) const { return static_cast<int>(neighbors_.at(i).size()); }

  /// Sum of degrees, i.e. the number of directed edges.
  long directed_edge_count() const noexcept { return 2L * static_cast<long>(edges_.size()); }

  /// Hop distances from `source` (-1 for unreachable nodes).
  std::vector<int> bfs_distances(int source) const {
    std::vector<int> dist(static_cast<std::size_t>(node_count_), -1);
    std::queue<int> frontier;
    dist[source] = 0;
    frontier.push(source);
    while (!frontier.empty()) {
      int u = frontier.front();
      frontier.pop();
      for (int v : neighbors_[u]) {
        if (dist[v] < 0) {
          dist[v] = dist[u] + 1;
          frontier.push(v);
        }
      }
    }
    return dist;
  }

  bool connected() const {
    if (node_count_ == 0) return false;
    auto d = bfs_distances(0);
    return std::none_of(d.begin(), d.end(), [](int x) { return x < 0; });
  }

  /// Graph diameter in hops. Requires a connected graph.
  int diameter() const {
    int diam = 0;
    for (int s = 0; s < node_count_; ++s) {
      auto d = bfs_distances(s);
      for (int x : d) {
        if (x < 0) throw TopologyError("diameter of a disconnected topology");
        diam = std::max(diam, x);
      }
    }
    return diam;
  }

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.node_count_ == b.node_count_ && a.edges_ == b.edges_;
  }

 private:
  int node_count_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> neighbors_;
};

// Edge-list text format: first line N, then one "i j" pair per line (0-indexed).
inline void write_edge_list(std::ostream& os, const Topology& t) {
  os << t.node_count() << '\n';
  for (auto [a, b] : t.edges()) os << a << ' ' << b << '\n';
}

inline Topology read_edge_list(std::istream& is) {
  std::string line;
  int n = -1;
  int lineno = 0;
  std::vector<std::pair<int, int>> edges;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    if (n < 0) {
      if (!(ls >> n) || n < 1)
        throw TopologyError("edge list line " + std::to_string(lineno) + ": expected node count");
      continue;
    }
    int a, b;
    if (!(ls >> a >> b))
      throw TopologyError("edge list line " + std::to_string(lineno) + ": expected \"i j\"");
    edges.emplace_back(a, b);
  }
  if (n < 0) throw TopologyError("edge list is empty");
  return Topology(n, std::move(edges));
}

/// Nodes uniform in the unit square, edge iff distance <= radius. Redraws from
/// the same stream until connected, at most `max_attempts` times.
inline Topology random_geometric_graph(int n_nodes, double radius, std::uint64_t rng_seed,
                                       int max_attempts = 100) {
  if (n_nodes < 1) throw TopologyError("random_geometric_graph: n_nodes must be >= 1");
  if (!(radius > 0.0)) throw TopologyError("random_geometric_graph: radius must be > 0");
  SeedStream rng = SeedStream(rng_seed).split("topology");
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<double> px(n_nodes), py(n_nodes);
    for (int i = 0; i < n_nodes; ++i) {
      px[i] = rng.uniform();
      py[i] = rng.uniform();
    }
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n_nodes; ++i)
      for (int j = i + 1; j < n_nodes; ++j)
        if (std::hypot(px[i] - px[j], py[i] - py[j]) <= radius) edges.emplace_back(i, j);
    Topology t(n_nodes, std::move(edges));
    if (t.connected()) return t;
  }
  std::ostringstream msg;
  msg << "disconnected topology: no connected draw after " << max_attempts
      << " attempts (seed " << rng_seed << ", radius " << radius << ")";
  throw TopologyError(msg.str());
}

/// sqrt(ln(N)/N), the radius used for the synthetic experiments. N = 1 maps to 1.
inline double default_radius(int n_nodes) {
  if (n_nodes <= 1) return 1.0;
  return std::sqrt(std::log(static_cast<double>(n_nodes)) / n_nodes);
}

/// Symmetric doubly stochastic weights respecting a topology.
class ConsensusMatrix {
 public:
  ConsensusMatrix(Topology topology, Matrix weights)
      : topology_(std::move(topology)), weights_(std::move(weights)) {}

  const Topology& topology() const noexcept { return topology_; }
  const Matrix& weights() const noexcept { return weights_; }
  int node_count() const noexcept { return topology_.node_count(); }
  double weight(int i, int j) const { return weights_(i, j); }
  double self_weight(int i) const { return weights_(i, i); }

  /// w̄ = max_i w_ii
  double max_self_weight() const { return weights_.diagonal().maxCoeff(); }

  /// Empty string when every invariant holds, otherwise the first violation.
  std::string check_invariants(double tol = 1e-12) const {
    const int n = node_count();
    if (weights_.rows() != n || weights_.cols() != n) return "shape differs from node count";
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (auto [a, b] : topology_.edges()) adj[a][b] = adj[b][a] = true;
    for (int i = 0; i < n; ++i) {
      if (!(weights_(i, i) > 0.0)) return "non-positive self weight at " + std::to_string(i);
      for (int j = 0; j < n; ++j) {
        const double w = weights_(i, j);
        if (w != weights_(j, i)) return "asymmetric entry";
        if (w < 0.0 || w > 1.0) return "entry outside [0,1]";
        if (i != j && adj[i][j] != (w > 0.0)) return "sparsity differs from topology";
      }
      if (std::abs(weights_.row(i).sum() - 1.0) > tol) return "row sum differs from 1";
      if (std::abs(weights_.col(i).sum() - 1.0) > tol) return "column sum differs from 1";
    }
    return {};
  }

 private:
  Topology topology_;
  Matrix weights_;
};

inline ConsensusMatrix metropolis_weights(const Topology& t) {
  if (!t.connected()) throw TopologyError("metropolis_weights: topology is not connected");
  const int n = t.node_count();
  Matrix w = Matrix::Zero(n, n);
  for (auto [a, b] : t.edges()) {
    const double v = 1.0 / (1.0 + std::max(t.degree(a), t.degree(b)));
    w(a, b) = v;
    w(b, a) = v;
  }
  for (int i = 0; i < n; ++i) {
    double off = 0.0;
    for (int j : t.neighbors(i)) off += w(i, j);
    w(i, i) = 1.0 - off;
  }
  return ConsensusMatrix(t, std::move(w));
}

struct SpectralInfo {
  double lambda2 = 1.0;
  double w_bar = 1.0;
  bool degenerate = false;  // N == 1: lambda2 has no meaning, reported as 1
};

inline SpectralInfo spectral_gap(const ConsensusMatrix& m) {
  SpectralInfo info;
  info.w_bar = m.max_self_weight();
  if (m.node_count() == 1) {
    info.lambda2 = 1.0;
    info.degenerate = true;
    return info;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.weights(), Eigen::EigenvaluesOnly);
  // ascending order; the largest is 1
  info.lambda2 = es.eigenvalues()(m.node_count() - 2);
  return info;
}

inline double min_eigenvalue(const ConsensusMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m.weights(), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

}  // namespace dinas
