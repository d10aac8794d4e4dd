#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "dinas/common.hpp"
#include "dinas/network.hpp"

namespace dinas {

struct DsfResult {
  double max = 0.0;
  int rounds = 0;
  std::int64_t scalars_sent = 0;
  std::int64_t scalars_received = 0;
};

/// Distributed scalar flooding of one value per node. Every round each node
/// forwards, to each neighbour, the values it holds that it has neither sent
/// to nor received from that neighbour. Stops once every node holds every
/// value, or after N - 1 rounds.
inline DsfResult dsf_max(const std::vector<double>& local_values, const Topology& t) {
  const int n = t.node_count();
  require_dims(static_cast<int>(local_values.size()) == n, "dsf_max: one value per node");
  DsfResult out;

  // known[i][o]: node i holds the value originating at o
  std::vector<std::vector<char>> known(n, std::vector<char>(n, 0));
  // exchanged[i][k][o]: value o already crossed the link between i and its k-th neighbour
  std::vector<std::vector<std::vector<char>>> exchanged(n);
  for (int i = 0; i < n; ++i) {
    known[i][i] = 1;
    exchanged[i].assign(t.neighbors(i).size(), std::vector<char>(n, 0));
  }
  auto slot = [&](int i, int j) {
    const auto& nb = t.neighbors(i);
    return static_cast<std::size_t>(std::lower_bound(nb.begin(), nb.end(), j) - nb.begin());
  };
  auto everyone_knows_all = [&] {
    for (const auto& row : known)
      if (std::find(row.begin(), row.end(), 0) != row.end()) return false;
    return true;
  };

  while (out.rounds < n - 1 && !everyone_knows_all()) {
    // messages of this round, computed from the state at the start of the round
    std::vector<std::vector<char>> incoming = known;
    for (int i = 0; i < n; ++i) {
      const auto& nb = t.neighbors(i);
      for (std::size_t k = 0; k < nb.size(); ++k) {
        const int j = nb[k];
        for (int o = 0; o < n; ++o) {
          if (!known[i][o] || exchanged[i][k][o]) continue;
          exchanged[i][k][o] = 1;
          exchanged[j][slot(j, i)][o] = 1;
          ++out.scalars_sent;
          ++out.scalars_received;
          incoming[j][o] = 1;
        }
      }
    }
    known = std::move(incoming);
    ++out.rounds;
  }

  // every node now evaluates the max over what it holds; node 0 stands for all
  out.max = local_values[0];
  for (int o = 0; o < n; ++o)
    if (known[0][o]) out.max = std::max(out.max, local_values[o]);
  return out;
}

}  // namespace dinas
