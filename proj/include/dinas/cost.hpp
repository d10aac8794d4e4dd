#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dinas {

/// Scalar-operation and scalar-message counters. Both only grow.
struct CostLedger {
  std::int64_t scalar_ops = 0;
  std::int64_t scalars_sent = 0;

  void add_ops(std::int64_t n) { scalar_ops += n; }
  void add_sent(std::int64_t n) { scalars_sent += n; }

  CostLedger& operator+=(const CostLedger& o) {
    scalar_ops += o.scalar_ops;
    scalars_sent += o.scalars_sent;
    return *this;
  }
  friend bool operator==(const CostLedger&, const CostLedger&) = default;
};

/// computation + r * communication
inline double total_cost(const CostLedger& ledger, double r) {
  return static_cast<double>(ledger.scalar_ops) + r * static_cast<double>(ledger.scalars_sent);
}

// Operation counting conventions shared by every method in the library.
// The counts are a declared convention, so only orderings between methods
// measured here are meaningful.
namespace ops {

/// one fused multiply-add, one exp or one log
inline constexpr std::int64_t kScalar = 1;

inline std::int64_t dot(std::int64_t n) { return n; }
inline std::int64_t axpy(std::int64_t n) { return n; }
inline std::int64_t matvec(std::int64_t n) { return n * n; }

/// dense n x n factorization, n^3/3 rounded to nearest
inline std::int64_t factorization(std::int64_t n) { return (n * n * n + 1) / 3; }

inline std::int64_t triangular_solve(std::int64_t n) { return n * n; }

/// Neighbour part of one JOR round at a node: (2 deg + 3) n, plus n for the
/// diagonal scaling. The local block product H_ii d_i is counted separately
/// as a matvec.
inline std::int64_t jor_round(std::int64_t degree, std::int64_t n) {
  return (2 * degree + 3) * n + n;
}

/// Weighted neighbour combination sum_j w_ij x_j including self: (deg + 1) n.
inline std::int64_t mixing(std::int64_t degree, std::int64_t n) { return (degree + 1) * n; }

/// Penalty part of the local gradient: (1/beta)((1 - w_ii) x_i - sum_j w_ij x_j).
inline std::int64_t penalty_gradient(std::int64_t degree, std::int64_t n) {
  return (2 * degree + 3) * n;
}

struct ConventionRow {
  std::string item;
  std::string count;
};

inline std::vector<ConventionRow> conventions() {
  return {
      {"fused multiply-add", "1"},
      {"exp / log / log1p", "1"},
      {"dot product, length n", "n"},
      {"axpy, length n", "n"},
      {"dense matrix-vector product, n x n", "n^2"},
      {"dense factorization, n x n", "n^3/3 (rounded)"},
      {"triangular solve, n x n", "n^2"},
      {"JOR round at node i (neighbour terms + update)", "(2 deg_i + 3) n + n diagonal scaling"},
      {"mixing sum_j w_ij x_j at node i", "(deg_i + 1) n"},
      {"penalty gradient term at node i", "(2 deg_i + 3) n"},
      {"DSF: one received scalar (max update)", "1"},
      {"message: one scalar sent to one neighbour", "1 scalar sent"},
  };
}

}  // namespace ops

}  // namespace dinas
