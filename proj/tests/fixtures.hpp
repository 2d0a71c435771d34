#pragma once

#include <utility>
#include <vector>

#include "wcds/graph.hpp"
#include "wcds/rng.hpp"

namespace fixtures {

using wcds::Graph;
using wcds::NodeId;

inline Graph edges(std::size_t n, std::vector<std::pair<NodeId, NodeId>> e) {
  return Graph::from_edges(n, e);
}

inline Graph path(std::size_t n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return edges(n, e);
}

inline Graph complete(std::size_t n) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return edges(n, e);
}

/// Centre 0 plus `leaves` leaves.
inline Graph star(std::size_t leaves) {
  std::vector<std::pair<NodeId, NodeId>> e;
  for (NodeId i = 1; i <= leaves; ++i) e.emplace_back(0, i);
  return edges(leaves + 1, e);
}

/// Seeded connected unit-disk graph; regenerates until connected.
inline Graph connected_udg(std::size_t n, double side, double radius, std::uint64_t seed) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Graph g = wcds::gen_udg(n, side, side, radius, wcds::derive_seed(seed, attempt));
    if (wcds::is_connected(g)) return g;
  }
}

}  // namespace fixtures
