#pragma once

// Baseline connected-dominating-set constructions used as comparison points
// for the clustering scheme.
//
// Both follow the classic centralized greedy designs (Guha and Khuller) that
// the Das-Bharghavan routing algorithms build on:
//
//   cds_alg1  single-phase growth of a connected black tree. Start from the
//             maximum-degree node; at every step blacken the gray node, or the
//             gray node plus one of its white neighbours, that turns the most
//             white nodes non-white per node added.
//   cds_alg2  two phases: greedy dominating set by closed-neighbourhood
//             coverage, then connect its fragments through shortest paths.
//
// These are not faithful re-implementations of the distributed protocols;
// they are deterministic baselines of comparable quality. Ties are always
// broken toward the smallest node id.

#include <cstddef>
#include <optional>
#include <queue>
#include <vector>

#include "wcds/error.hpp"
#include "wcds/graph.hpp"

namespace wcds {

namespace detail {
inline void require_connected_nonempty(const Graph& g, const char* who) {
  if (g.node_count() == 0) throw InvalidArgument(std::string(who) + ": empty graph");
  if (!is_connected(g)) throw InfeasibleError(std::string(who) + ": graph is disconnected");
}
}  // namespace detail

inline VertexSet cds_alg1(const Graph& g) {
  detail::require_connected_nonempty(g, "cds_alg1");
  enum Color : unsigned char { white, gray, black };
  const std::size_t n = g.node_count();
  std::vector<Color> color(n, white);
  std::size_t whites = n;
  std::vector<NodeId> members;

  auto blacken = [&](NodeId v) {
    if (color[v] == white) --whites;
    color[v] = black;
    members.push_back(v);
    for (NodeId w : g.neighbors(v)) {
      if (color[w] == white) {
        color[w] = gray;
        --whites;
      }
    }
  };

  NodeId start = 0;
  for (NodeId v = 1; v < n; ++v)
    if (g.degree(v) > g.degree(start)) start = v;
  blacken(start);

  std::vector<std::size_t> stamp(n, 0);
  std::size_t epoch = 0;
  while (whites > 0) {
    // Best candidate so far: gain/cost, compared by cross-multiplication.
    std::size_t best_gain = 0, best_cost = 1;
    NodeId best_u = 0;
    std::optional<NodeId> best_w;

    for (NodeId u = 0; u < n; ++u) {
      if (color[u] != gray) continue;
      ++epoch;
      std::size_t single = 0;
      for (NodeId x : g.neighbors(u)) {
        if (color[x] == white) {
          stamp[x] = epoch;
          ++single;
        }
      }
      if (single * best_cost > best_gain * 1) {
        best_gain = single;
        best_cost = 1;
        best_u = u;
        best_w.reset();
      }
      for (NodeId w : g.neighbors(u)) {
        if (color[w] != white) continue;
        std::size_t pair = single;
        for (NodeId x : g.neighbors(w))
          if (color[x] == white && stamp[x] != epoch) ++pair;
        if (pair * best_cost > best_gain * 2) {
          best_gain = pair;
          best_cost = 2;
          best_u = u;
          best_w = w;
        }
      }
    }
    if (best_gain == 0) throw InfeasibleError("cds_alg1: no progress possible");
    blacken(best_u);
    if (best_w) blacken(*best_w);
  }
  return VertexSet(std::move(members));
}

/// Greedy dominating set: repeatedly take the node whose closed neighbourhood
/// covers the most uncovered nodes.
inline VertexSet greedy_dominating_set(const Graph& g) {
  const std::size_t n = g.node_count();
  std::vector<bool> covered(n, false);
  std::size_t uncovered = n;
  std::vector<NodeId> members;
  while (uncovered > 0) {
    NodeId best = 0;
    std::size_t best_gain = 0;
    for (NodeId v = 0; v < n; ++v) {
      std::size_t gain = covered[v] ? 0 : 1;
      for (NodeId w : g.neighbors(v)) gain += covered[w] ? 0 : 1;
      if (gain > best_gain) {
        best_gain = gain;
        best = v;
      }
    }
    members.push_back(best);
    if (!covered[best]) {
      covered[best] = true;
      --uncovered;
    }
    for (NodeId w : g.neighbors(best)) {
      if (!covered[w]) {
        covered[w] = true;
        --uncovered;
      }
    }
  }
  return VertexSet(std::move(members));
}

inline VertexSet cds_alg2(const Graph& g) {
  detail::require_connected_nonempty(g, "cds_alg2");
  const std::size_t n = g.node_count();
  VertexSet ds = greedy_dominating_set(g);
  std::vector<bool> in_ds(n, false);
  for (NodeId v : ds) in_ds[v] = true;

  while (true) {
    const auto label = component_labels(g, in_ds);
    if (std::none_of(label.begin(), label.end(), [](int l) { return l > 0; })) break;

    // Multi-source BFS from the fragment holding the smallest member to the
    // nearest vertex of any other fragment.
    std::vector<std::int64_t> parent(n, -2);
    std::queue<NodeId> frontier;
    for (NodeId v = 0; v < n; ++v) {
      if (label[v] == 0) {
        parent[v] = -1;
        frontier.push(v);
      }
    }
    std::optional<NodeId> target;
    while (!frontier.empty() && !target) {
      NodeId v = frontier.front();
      frontier.pop();
      for (NodeId w : g.neighbors(v)) {
        if (parent[w] != -2) continue;
        parent[w] = v;
        if (label[w] > 0) {
          target = w;
          break;
        }
        frontier.push(w);
      }
    }
    if (!target) throw InfeasibleError("cds_alg2: fragments cannot be connected");
    for (auto v = static_cast<std::int64_t>(parent[*target]); v >= 0 && label[v] != 0;
         v = parent[v]) {
      in_ds[v] = true;
      ds.insert(static_cast<NodeId>(v));
    }
  }
  return ds;
}

}  // namespace wcds
