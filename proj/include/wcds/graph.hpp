#pragma once

// Unit-disk graphs and dominating-set predicates.
//
// A Graph is an immutable, undirected, irreflexive adjacency structure with
// optional node positions. Geometric graphs carry the positions and the
// common transmission radius; an edge joins i != j exactly when their squared
// Euclidean distance is <= radius^2 (no epsilon).
//
// Three nested properties are checked here:
//   dominating  N[S] = V
//   wcds        dominating, and the subgraph induced by N[S] is connected
//   cds         dominating, and the subgraph induced by S is connected
// so is_cds implies is_wcds implies is_dominating. Empty and single-vertex
// induced subgraphs count as connected.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <istream>
#include <numbers>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "wcds/error.hpp"
#include "wcds/format.hpp"
#include "wcds/rng.hpp"

namespace wcds {

using NodeId = std::uint32_t;

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

inline double squared_distance(Point a, Point b) noexcept {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

class Graph {
 public:
  Graph() = default;

  /// Unit-disk construction. Vertices with active[v] == false keep their
  /// position but receive no edges; an empty mask means all active.
  static Graph unit_disk(std::vector<Point> positions, double radius,
                         const std::vector<bool>& active = {}) {
    if (!(radius > 0.0)) throw InvalidArgument("unit_disk: radius must be positive");
    if (!active.empty() && active.size() != positions.size())
      throw InvalidArgument("unit_disk: activity mask size mismatch");
    Graph g;
    const std::size_t n = positions.size();
    g.adj_.assign(n, {});
    const double r2 = radius * radius;
    auto on = [&](std::size_t v) { return active.empty() || active[v]; };
    for (std::size_t i = 0; i < n; ++i) {
      if (!on(i)) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!on(j)) continue;
        if (squared_distance(positions[i], positions[j]) <= r2) {
          g.adj_[i].push_back(static_cast<NodeId>(j));
          g.adj_[j].push_back(static_cast<NodeId>(i));
        }
      }
    }
    for (auto& row : g.adj_) std::sort(row.begin(), row.end());
    g.positions_ = std::move(positions);
    g.radius_ = radius;
    return g;
  }

  /// Abstract graph from an explicit edge list. Self-loops are rejected,
  /// duplicate edges collapse. Positions are optional (empty or one per node).
  static Graph from_edges(std::size_t n, std::span<const std::pair<NodeId, NodeId>> edges,
                          std::vector<Point> positions = {}, double radius = 0.0) {
    if (!positions.empty() && positions.size() != n)
      throw InvalidArgument("from_edges: positions size mismatch");
    Graph g;
    g.adj_.assign(n, {});
    for (auto [a, b] : edges) {
      if (a >= n || b >= n) throw InvalidArgument("from_edges: node id out of range");
      if (a == b) throw InvalidArgument("from_edges: self-loop");
      g.adj_[a].push_back(b);
      g.adj_[b].push_back(a);
    }
    for (auto& row : g.adj_) {
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    g.positions_ = std::move(positions);
    g.radius_ = radius;
    return g;
  }

  std::size_t node_count() const noexcept { return adj_.size(); }

  std::size_t edge_count() const noexcept {
    std::size_t twice = 0;
    for (const auto& row : adj_) twice += row.size();
    return twice / 2;
  }

  double radius() const noexcept { return radius_; }
  bool has_positions() const noexcept { return !positions_.empty(); }
  const std::vector<Point>& positions() const noexcept { return positions_; }
  Point position(NodeId v) const { return positions_.at(v); }

  std::span<const NodeId> neighbors(NodeId v) const { return adj_.at(v); }
  std::size_t degree(NodeId v) const { return adj_.at(v).size(); }

  bool adjacent(NodeId a, NodeId b) const {
    const auto& row = adj_.at(a);
    return std::binary_search(row.begin(), row.end(), b);
  }

  /// Edges as (i, j) with i < j, in lexicographic order.
  std::vector<std::pair<NodeId, NodeId>> edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId i = 0; i < adj_.size(); ++i)
      for (NodeId j : adj_[i])
        if (i < j) out.emplace_back(i, j);
    return out;
  }

  friend bool operator==(const Graph&, const Graph&) = default;

 private:
  std::vector<Point> positions_;
  double radius_ = 0.0;
  std::vector<std::vector<NodeId>> adj_;
};

/// Sorted, duplicate-free set of node ids.
class VertexSet {
 public:
  VertexSet() = default;
  VertexSet(std::initializer_list<NodeId> ids) : VertexSet(std::vector<NodeId>(ids)) {}
  explicit VertexSet(std::vector<NodeId> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  }

  bool contains(NodeId v) const { return std::binary_search(ids_.begin(), ids_.end(), v); }
  void insert(NodeId v) {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), v);
    if (it == ids_.end() || *it != v) ids_.insert(it, v);
  }
  void erase(NodeId v) {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), v);
    if (it != ids_.end() && *it == v) ids_.erase(it);
  }

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  auto begin() const noexcept { return ids_.begin(); }
  auto end() const noexcept { return ids_.end(); }
  const std::vector<NodeId>& ids() const noexcept { return ids_; }

  bool valid_for(const Graph& g) const noexcept {
    return ids_.empty() || ids_.back() < g.node_count();
  }

  friend bool operator==(const VertexSet&, const VertexSet&) = default;
  friend auto operator<=>(const VertexSet&, const VertexSet&) = default;

 private:
  std::vector<NodeId> ids_;
};

// ---------------------------------------------------------------------------
// Generation

/// Radius giving mean degree d for n uniform nodes on a width x height
/// rectangle, ignoring border effects: r = sqrt(d * A / (pi * (n - 1))).
inline double radius_for_expected_degree(std::size_t n, double width, double height, double d) {
  if (n < 2) throw InvalidArgument("radius_for_expected_degree: need n >= 2");
  if (!(d > 0.0)) throw InvalidArgument("radius_for_expected_degree: degree must be positive");
  if (!(width > 0.0) || !(height > 0.0))
    throw InvalidArgument("radius_for_expected_degree: dimensions must be positive");
  return std::sqrt(d * width * height / (std::numbers::pi * static_cast<double>(n - 1)));
}

inline std::vector<Point> uniform_positions(std::size_t n, double width, double height, Rng& rng) {
  std::vector<Point> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(0.0, width);
    const double y = rng.uniform(0.0, height);
    pts.push_back({x, y});
  }
  return pts;
}

/// n nodes uniform over [0,width) x [0,height), unit-disk edges.
inline Graph gen_udg(std::size_t n, double width, double height, double radius, std::uint64_t seed) {
  if (!(width > 0.0) || !(height > 0.0) || !(radius > 0.0))
    throw InvalidArgument("gen_udg: width, height and radius must be positive");
  Rng rng(seed);
  return Graph::unit_disk(uniform_positions(n, width, height, rng), radius);
}

// ---------------------------------------------------------------------------
// Connectivity helpers

/// Component label per vertex (labels dense, in order of smallest member).
/// Vertices outside `mask` (when given) get label -1 and are not traversed.
inline std::vector<int> component_labels(const Graph& g, const std::vector<bool>& mask = {}) {
  const std::size_t n = g.node_count();
  std::vector<int> label(n, -1);
  int next = 0;
  std::vector<NodeId> stack;
  for (NodeId s = 0; s < n; ++s) {
    if (label[s] != -1 || (!mask.empty() && !mask[s])) continue;
    label[s] = next;
    stack.push_back(s);
    while (!stack.empty()) {
      NodeId v = stack.back();
      stack.pop_back();
      for (NodeId w : g.neighbors(v)) {
        if (label[w] != -1 || (!mask.empty() && !mask[w])) continue;
        label[w] = next;
        stack.push_back(w);
      }
    }
    ++next;
  }
  return label;
}

/// Connectivity of the subgraph induced by `mask`; empty and singleton count as connected.
inline bool induced_connected(const Graph& g, const std::vector<bool>& mask) {
  const auto label = component_labels(g, mask);
  return std::none_of(label.begin(), label.end(), [](int l) { return l > 0; });
}

inline bool is_connected(const Graph& g) { return induced_connected(g, {}); }

/// Closed neighbourhood N[S] as a membership mask.
inline std::vector<bool> closed_neighborhood(const Graph& g, const VertexSet& s) {
  std::vector<bool> covered(g.node_count(), false);
  for (NodeId v : s) {
    covered[v] = true;
    for (NodeId w : g.neighbors(v)) covered[w] = true;
  }
  return covered;
}

/// Subgraph induced by `keep` (sorted ids), relabelled 0..k-1 in that order.
inline Graph induced_subgraph(const Graph& g, const std::vector<NodeId>& keep) {
  std::vector<std::int64_t> index(g.node_count(), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) index.at(keep[i]) = static_cast<std::int64_t>(i);
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::vector<Point> pts;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (g.has_positions()) pts.push_back(g.position(keep[i]));
    for (NodeId w : g.neighbors(keep[i]))
      if (index[w] > static_cast<std::int64_t>(i))
        edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(index[w]));
  }
  return Graph::from_edges(keep.size(), edges, std::move(pts), g.radius());
}

// ---------------------------------------------------------------------------
// Predicates

namespace detail {
inline void require_valid(const Graph& g, const VertexSet& s) {
  if (!s.valid_for(g)) throw InvalidArgument("vertex set contains ids outside the graph");
}
}  // namespace detail

inline bool is_dominating(const Graph& g, const VertexSet& s) {
  detail::require_valid(g, s);
  const auto covered = closed_neighborhood(g, s);
  return std::all_of(covered.begin(), covered.end(), [](bool c) { return c; });
}

inline bool is_cds(const Graph& g, const VertexSet& s) {
  if (!is_dominating(g, s)) return false;
  std::vector<bool> in_s(g.node_count(), false);
  for (NodeId v : s) in_s[v] = true;
  return induced_connected(g, in_s);
}

inline bool is_wcds(const Graph& g, const VertexSet& s) {
  detail::require_valid(g, s);
  const auto stars = closed_neighborhood(g, s);
  if (!std::all_of(stars.begin(), stars.end(), [](bool c) { return c; })) return false;
  return induced_connected(g, stars);
}

enum class DomMode { dominating, cds, wcds };

inline constexpr std::size_t kDefaultExhaustiveLimit = 14;

inline bool satisfies(const Graph& g, const VertexSet& s, DomMode mode) {
  switch (mode) {
    case DomMode::dominating: return is_dominating(g, s);
    case DomMode::cds: return is_cds(g, s);
    case DomMode::wcds: return is_wcds(g, s);
  }
  return false;
}

/// Exact minimum set for `mode` by exhaustive search in order of size, then
/// lexicographic member list. Exact oracle for small instances only.
inline VertexSet brute_min_ds(const Graph& g, DomMode mode,
                              std::size_t limit = kDefaultExhaustiveLimit) {
  const std::size_t n = g.node_count();
  if (n > limit)
    throw SizeLimitError("brute_min_ds: " + std::to_string(n) + " nodes exceeds limit " +
                         std::to_string(limit));
  if (mode != DomMode::dominating && !is_connected(g))
    throw InfeasibleError("brute_min_ds: graph is disconnected; no connected dominating set");

  std::vector<NodeId> pick;
  for (std::size_t k = 0; k <= n; ++k) {
    // Combinations of size k in lexicographic order.
    pick.resize(k);
    for (std::size_t i = 0; i < k; ++i) pick[i] = static_cast<NodeId>(i);
    while (true) {
      VertexSet candidate(pick);
      if (satisfies(g, candidate, mode)) return candidate;
      std::size_t i = k;
      while (i > 0 && pick[i - 1] == n - k + (i - 1)) --i;
      if (i == 0) break;
      ++pick[i - 1];
      for (std::size_t j = i; j < k; ++j) pick[j] = pick[j - 1] + 1;
    }
  }
  // Unreachable: V itself is dominating (and connected when g is).
  throw InfeasibleError("brute_min_ds: no feasible set");
}

// ---------------------------------------------------------------------------
// Edge-list text format:
//   n=<count> r=<radius>
//   <id> <x> <y>        one line per node
//   <i> <j>             one line per edge, i < j

inline void write_edge_list(std::ostream& os, const Graph& g) {
  os << "n=" << g.node_count() << " r=" << format_double(g.radius()) << '\n';
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const Point p = g.has_positions() ? g.position(v) : Point{};
    os << v << ' ' << format_double(p.x) << ' ' << format_double(p.y) << '\n';
  }
  for (auto [i, j] : g.edges()) os << i << ' ' << j << '\n';
}

inline Graph read_edge_list(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("edge list: missing header");
  std::istringstream header(line);
  std::string ntok, rtok;
  header >> ntok >> rtok;
  if (ntok.rfind("n=", 0) != 0 || rtok.rfind("r=", 0) != 0)
    throw ParseError("edge list: header must be 'n=<count> r=<radius>'");
  const auto n = parse_integer<std::size_t>(std::string_view(ntok).substr(2));
  const double r = parse_double(std::string_view(rtok).substr(2));

  std::vector<Point> pts(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(is, line)) throw ParseError("edge list: truncated node section");
    std::istringstream row(line);
    std::string id, x, y;
    if (!(row >> id >> x >> y)) throw ParseError("edge list: bad node line '" + line + "'");
    if (parse_integer<std::size_t>(id) != i) throw ParseError("edge list: node ids out of order");
    pts[i] = {parse_double(x), parse_double(y)};
  }
  std::vector<std::pair<NodeId, NodeId>> edges;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b;
    if (!(row >> a >> b)) throw ParseError("edge list: bad edge line '" + line + "'");
    edges.emplace_back(parse_integer<NodeId>(a), parse_integer<NodeId>(b));
  }
  return Graph::from_edges(n, edges, std::move(pts), r);
}

}  // namespace wcds
