#pragma once

#include <cmath>

#include "dinas/harness.hpp"

namespace dinas::test {

/// Central differences of f.value along every coordinate.
inline Vector fd_gradient(const LocalCost& f, const Vector& y, double h = 1e-6) {
  Vector g(y.size());
  for (Index j = 0; j < y.size(); ++j) {
    Vector a = y, b = y;
    a(j) += h;
    b(j) -= h;
    g(j) = (f.value(a) - f.value(b)) / (2.0 * h);
  }
  return g;
}

/// Central differences of f.gradient along every coordinate.
inline Matrix fd_hessian(const LocalCost& f, const Vector& y, double h = 1e-5) {
  Matrix m(y.size(), y.size());
  for (Index j = 0; j < y.size(); ++j) {
    Vector a = y, b = y;
    a(j) += h;
    b(j) -= h;
    m.col(j) = (f.gradient(a) - f.gradient(b)) / (2.0 * h);
  }
  return m;
}

inline double rel_err(const Matrix& got, const Matrix& want) {
  return (got - want).norm() / std::max(1.0, want.norm());
}

inline Topology path3() { return Topology(3, {{0, 1}, {1, 2}}); }

inline ConsensusMatrix pair_consensus() { return metropolis_weights(Topology(2, {{0, 1}})); }

inline ConsensusMatrix desk_consensus(int nodes = 5, std::uint64_t seed = 1) {
  return metropolis_weights(random_geometric_graph(nodes, default_radius(nodes), seed));
}

}  // namespace dinas::test
