#pragma once

// Deployment and round-synchronous simulation of cluster formation.
//
// A World owns the physical layout (positions, common radius, radio graph),
// the protocol state of every deployed sensor, the base station and any
// injected adversaries. Everything sent in round r is delivered in round r+1:
//
//   local   every active node within range of the transmitter
//   direct  the addressed node, if within range
//   flood   the destination, relayed over legitimate nodes regardless of
//           whether they can read it, plus the transmitter's hop-1
//           neighbours, which overhear the first transmission
//
// Adversaries hold radio reachability but no provisioned keys. They never
// relay floods.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "wcds/error.hpp"
#include "wcds/graph.hpp"
#include "wcds/key_scheme.hpp"
#include "wcds/protocol.hpp"
#include "wcds/rng.hpp"

namespace wcds {

enum class PlacementMode { uniform, group_clustered };

struct PlacementModel {
  PlacementMode mode = PlacementMode::group_clustered;
  double sigma = -1.0;  // negative: 0.5 * radius
  double width = 100.0;
  double height = 100.0;
  double radius = 20.0;
  std::optional<Point> bs_position;  // default: centre of the area

  double effective_sigma() const { return sigma < 0.0 ? 0.5 * radius : sigma; }
};

enum class AdversaryBehavior { forge_join, forge_approve, replay };

inline const char* to_string(AdversaryBehavior b) {
  switch (b) {
    case AdversaryBehavior::forge_join: return "forge_join";
    case AdversaryBehavior::forge_approve: return "forge_approve";
    case AdversaryBehavior::replay: return "replay";
  }
  return "?";
}

struct Adversary {
  NodeId id = 0;
  AdversaryBehavior behavior = AdversaryBehavior::forge_join;
  Rng rng;
  std::vector<Envelope> captured;
  std::uint64_t active_since = 0;
};

struct MediatorRecord {
  NodeId os = 0;
  NodeId own_gd = 0;
  NodeId foreign_gd = 0;
  friend bool operator==(const MediatorRecord&, const MediatorRecord&) = default;
};

struct OrphanRecord {
  NodeId os = 0;
  Resolution resolution = Resolution::adopted;
  friend bool operator==(const OrphanRecord&, const OrphanRecord&) = default;
};

struct ClusterOutcome {
  VertexSet dominator_set;
  std::map<NodeId, NodeId> membership;
  std::vector<MediatorRecord> mediators;
  std::vector<OrphanRecord> orphan_log;
  std::vector<NodeId> coverage_failures;  // deployed Oss left unresolved
  std::map<MessageKind, std::uint64_t> message_count;
  std::uint64_t adversary_messages = 0;
  std::vector<NodeId> hostile_audit;
  std::uint64_t rounds = 0;
};

struct Delivery {
  NodeId recipient = 0;
  Envelope envelope;
};

struct World {
  KeyMaterial material;
  PlacementModel placement;
  std::uint64_t seed = 0;

  // Indexed by node id: sensors [0, bs_id), the BS, then adversaries.
  std::vector<Point> positions;
  std::vector<bool> active;
  Graph graph;

  std::map<NodeId, NodeState> nodes;
  BsState bs;
  std::vector<Adversary> adversaries;

  std::uint64_t round = 0;
  std::vector<Delivery> pending;
  std::uint64_t next_uid = 1;
  std::vector<Envelope> sent_log;  // every transmission, including adversarial
  std::vector<std::uint64_t> delivered_uids;
  std::vector<Event> events;
  std::map<MessageKind, std::uint64_t> message_count;
  std::uint64_t adversary_messages = 0;

  NodeId bs_id() const { return material.bs_id; }
  bool is_sensor(NodeId id) const { return id < material.bs_id; }
  bool is_adversary(NodeId id) const { return id > material.bs_id; }

  void rebuild_graph() { graph = Graph::unit_disk(positions, placement.radius, active); }

  std::vector<NodeId> deployed_sensors() const {
    std::vector<NodeId> out;
    for (NodeId v = 0; v < material.bs_id; ++v)
      if (active[v]) out.push_back(v);
    return out;
  }
};

// ---------------------------------------------------------------------------
// Deployment

namespace detail {
inline Point clamp_to(Point p, const PlacementModel& pm) {
  return {std::clamp(p.x, 0.0, pm.width), std::clamp(p.y, 0.0, pm.height)};
}
}  // namespace detail

/// Sensor positions. group_clustered: a uniform anchor per group, the GD on
/// the anchor, members at Gaussian offsets (sigma per axis) clamped to the area.
inline std::vector<Point> place_sensors(const KeyMaterial& m, const PlacementModel& pm,
                                        std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x706c616365ULL));  // "place"
  std::vector<Point> pts(m.bs_id);
  if (pm.mode == PlacementMode::uniform) {
    for (NodeId v = 0; v < m.bs_id; ++v) {
      const double x = rng.uniform(0.0, pm.width);
      const double y = rng.uniform(0.0, pm.height);
      pts[v] = {x, y};
    }
    return pts;
  }
  const double sigma = pm.effective_sigma();
  for (const Group& g : m.groups) {
    const double ax = rng.uniform(0.0, pm.width);
    const double ay = rng.uniform(0.0, pm.height);
    pts[g.gd] = {ax, ay};
    for (NodeId os : g.members) {
      const double dx = sigma * rng.gaussian();
      const double dy = sigma * rng.gaussian();
      pts[os] = detail::clamp_to({ax + dx, ay + dy}, pm);
    }
  }
  return pts;
}

/// Place and power up every provisioned, non-reserved sensor plus the BS.
inline World deploy(KeyMaterial material, const PlacementModel& placement, std::uint64_t seed,
                    std::size_t tau = 1) {
  if (!(placement.width > 0.0) || !(placement.height > 0.0) || !(placement.radius > 0.0))
    throw InvalidArgument("deploy: width, height and radius must be positive");
  if (tau < 1) throw InvalidArgument("deploy: tau must be >= 1");
  World w;
  w.placement = placement;
  w.seed = seed;
  w.positions = place_sensors(material, placement, seed);
  w.positions.push_back(placement.bs_position.value_or(
      Point{placement.width / 2.0, placement.height / 2.0}));
  w.active.assign(w.positions.size(), false);
  w.active[material.bs_id] = true;

  for (NodeId v = 0; v < material.bs_id; ++v) {
    if (material.reserve.contains(v)) continue;
    w.active[v] = true;
    NodeState s = make_node_state(v, material.ranks.at(v), material.rings.at(v),
                                  material.key_bits, seed);
    s.tau = tau;
    w.nodes.emplace(v, std::move(s));
  }
  w.bs = make_bs_state(material, seed);
  w.material = std::move(material);
  w.rebuild_graph();
  return w;
}

// ---------------------------------------------------------------------------
// Adversaries

inline World inject_adversary_at(World world, const std::vector<Point>& where,
                                 AdversaryBehavior behavior) {
  for (const Point& p : where) {
    const auto id = static_cast<NodeId>(world.positions.size());
    world.positions.push_back(p);
    world.active.push_back(true);
    Adversary a;
    a.id = id;
    a.behavior = behavior;
    a.rng = Rng(derive_seed(world.seed, 0x616476ULL + id));
    a.active_since = world.round;
    world.adversaries.push_back(std::move(a));
  }
  world.rebuild_graph();
  return world;
}

/// `count` keyless nodes at uniform positions over the deployment area.
inline World inject_adversary(World world, std::size_t count, AdversaryBehavior behavior,
                              std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x686f7374ULL));
  std::vector<Point> where;
  for (std::size_t i = 0; i < count; ++i) {
    const double x = rng.uniform(0.0, world.placement.width);
    const double y = rng.uniform(0.0, world.placement.height);
    where.push_back({x, y});
  }
  return inject_adversary_at(std::move(world), where, behavior);
}

namespace detail {

inline Key forged_key(Rng& rng, std::size_t key_bits) {
  return random_key(kForeignTag | (rng.next_u64() >> 8), key_bits, rng);
}

inline std::vector<Envelope> adversary_step(Adversary& a, std::uint64_t round,
                                            std::size_t key_bits) {
  std::vector<Envelope> out;
  const std::uint64_t local = round - a.active_since;
  switch (a.behavior) {
    case AdversaryBehavior::forge_join: {
      Key k = forged_key(a.rng, key_bits);
      out.push_back(msg::make(a.id, MessageKind::JOIN_REQ, k,
                              BodyWriter().u64(round).u64(a.id).take(), Route::local));
      if (local == kApprovalTimeout)
        out.push_back(msg::make(a.id, MessageKind::GD_ERR, k,
                                BodyWriter().u64(round).u64(a.id).u64(0).take(), Route::flood));
      break;
    }
    case AdversaryBehavior::forge_approve: {
      Key k = forged_key(a.rng, key_bits);
      out.push_back(msg::make(a.id, MessageKind::JOIN_APRV, k,
                              BodyWriter().u64(round).u64(a.id).u64(0).u64(0).take(),
                              Route::local));
      break;
    }
    case AdversaryBehavior::replay: {
      constexpr std::size_t kReplayBudget = 64;
      for (std::size_t i = 0; i < a.captured.size() && i < kReplayBudget; ++i) {
        Envelope e = a.captured[i];
        e.route = e.route == Route::flood ? Route::flood : Route::local;
        out.push_back(std::move(e));
      }
      a.captured.clear();
      break;
    }
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Transport and rounds

namespace detail {

/// BFS hop distance from `from` over active legitimate relays (sensors, BS).
inline std::vector<std::int64_t> flood_distances(const World& w, NodeId from) {
  std::vector<std::int64_t> dist(w.positions.size(), -1);
  std::queue<NodeId> q;
  dist[from] = 0;
  q.push(from);
  while (!q.empty()) {
    NodeId v = q.front();
    q.pop();
    if (v != from && w.is_adversary(v)) continue;  // adversaries do not relay
    for (NodeId u : w.graph.neighbors(v)) {
      if (dist[u] != -1) continue;
      dist[u] = dist[v] + 1;
      q.push(u);
    }
  }
  return dist;
}

inline void transmit(World& w, NodeId transmitter, Envelope env, std::vector<Delivery>& next) {
  env.uid = w.next_uid++;
  if (w.is_adversary(transmitter))
    ++w.adversary_messages;
  else
    ++w.message_count[env.kind];
  w.sent_log.push_back(env);

  auto deliver = [&](NodeId to, std::uint32_t hops) {
    if (w.is_adversary(to)) {
      for (auto& a : w.adversaries)
        if (a.id == to && a.behavior == AdversaryBehavior::replay) a.captured.push_back(env);
      return;
    }
    Envelope copy = env;
    copy.hops = hops;
    next.push_back({to, std::move(copy)});
  };

  const auto neighbors = w.graph.neighbors(transmitter);
  switch (env.route) {
    case Route::local:
      for (NodeId u : neighbors) deliver(u, 1);
      break;
    case Route::direct:
      for (NodeId u : neighbors)
        if (u == env.to || w.is_adversary(u)) deliver(u, 1);
      break;
    case Route::flood: {
      const NodeId dest = env.to.value_or(w.bs_id());
      if (!env.to) env.to = dest;
      const auto dist = flood_distances(w, transmitter);
      for (NodeId u : neighbors)
        if (u != dest) deliver(u, 1);
      if (dest < dist.size() && dist[dest] > 0)
        deliver(dest, static_cast<std::uint32_t>(dist[dest]));
      break;
    }
  }
}

}  // namespace detail

/// True while any node still has a timer running or a message is in flight.
inline bool busy(const World& w) {
  if (!w.pending.empty() || w.bs.busy()) return true;
  for (const auto& [id, s] : w.nodes) {
    if (!w.active[id]) continue;
    if (s.rank == Rank::Os &&
        (s.phase == Phase::idle || s.phase == Phase::awaiting_approval || s.leave_requested))
      return true;
  }
  return !w.adversaries.empty();
}

inline void step_round(World& w) {
  const std::uint64_t r = w.round;
  std::map<NodeId, std::vector<Envelope>> inbox;
  for (auto& d : w.pending) {
    w.delivered_uids.push_back(d.envelope.uid);
    inbox[d.recipient].push_back(std::move(d.envelope));
  }
  w.pending.clear();

  std::vector<std::pair<NodeId, Envelope>> sends;
  std::vector<NodeId> departed;
  for (auto& [id, state] : w.nodes) {
    if (!w.active[id]) continue;
    const auto& in = inbox[id];
    Step st = (state.rank == Rank::Os) ? os_step(std::move(state), in, r)
                                       : gd_step(std::move(state), in, r);
    state = std::move(st.state);
    for (auto& e : st.outbox) sends.emplace_back(id, std::move(e));
    for (auto& e : st.events) w.events.push_back(std::move(e));
    for (const Key& k : st.escrow) w.bs.table.register_group_key(id, k);
    if (state.phase == Phase::left) departed.push_back(id);
  }
  {
    BsStep st = bs_step(std::move(w.bs), inbox[w.bs_id()], r);
    w.bs = std::move(st.state);
    for (auto& e : st.outbox) sends.emplace_back(w.bs_id(), std::move(e));
    for (auto& e : st.events) w.events.push_back(std::move(e));
  }
  for (auto& a : w.adversaries)
    for (auto& e : detail::adversary_step(a, r, w.material.key_bits))
      sends.emplace_back(a.id, std::move(e));

  std::vector<Delivery> next;
  for (auto& [from, env] : sends) detail::transmit(w, from, std::move(env), next);
  w.pending = std::move(next);

  if (!departed.empty()) {
    for (NodeId id : departed) w.active[id] = false;
    w.rebuild_graph();
    std::erase_if(w.pending, [&](const Delivery& d) { return !w.active[d.recipient]; });
  }
  ++w.round;
}

inline ClusterOutcome assemble_outcome(const World& w) {
  ClusterOutcome o;
  std::vector<NodeId> dominators;
  for (const auto& [id, s] : w.nodes) {
    if (!w.active[id]) continue;
    if (s.rank == Rank::GD || s.rank == Rank::GD_os) dominators.push_back(id);
  }
  o.dominator_set = VertexSet(dominators);
  for (const auto& [id, s] : w.nodes) {
    if (!w.active[id]) continue;
    if (s.rank == Rank::Os) {
      if (s.phase == Phase::joined && s.dominator) {
        o.membership[id] = *s.dominator;
        if (s.resolution == Resolution::adopted) o.orphan_log.push_back({id, Resolution::adopted});
        for (NodeId g : s.neighbor_dominators)
          if (g != *s.dominator && o.dominator_set.contains(g))
            o.mediators.push_back({id, *s.dominator, g});
      } else {
        o.coverage_failures.push_back(id);
      }
    } else if (s.rank == Rank::GD_os) {
      o.orphan_log.push_back({id, Resolution::promoted});
    }
  }
  // Dual coverage seen from the dominator side.
  for (const auto& [gid, g] : w.nodes) {
    if (!w.active[gid] || g.rank == Rank::Os) continue;
    for (NodeId os : g.mediators) {
      auto it = o.membership.find(os);
      if (it == o.membership.end() || it->second == gid) continue;
      MediatorRecord rec{os, it->second, gid};
      if (std::find(o.mediators.begin(), o.mediators.end(), rec) == o.mediators.end())
        o.mediators.push_back(rec);
    }
  }
  std::sort(o.mediators.begin(), o.mediators.end(), [](const auto& a, const auto& b) {
    return std::tie(a.os, a.own_gd, a.foreign_gd) < std::tie(b.os, b.own_gd, b.foreign_gd);
  });
  std::sort(o.orphan_log.begin(), o.orphan_log.end(),
            [](const auto& a, const auto& b) { return a.os < b.os; });
  o.message_count = w.message_count;
  o.adversary_messages = w.adversary_messages;
  o.hostile_audit = w.bs.hostile;
  o.rounds = w.round;
  return o;
}

inline constexpr std::uint64_t kMinRounds = kApprovalTimeout + kMatchWindow;

/// Drive all state machines until nothing is pending or `max_rounds` more
/// rounds have elapsed.
inline ClusterOutcome run(World& w, std::uint64_t max_rounds) {
  if (max_rounds < kMinRounds)
    throw InvalidArgument("run: max_rounds must cover the approval timeout and matching window");
  for (std::uint64_t i = 0; i < max_rounds && busy(w); ++i) step_round(w);
  return assemble_outcome(w);
}

// ---------------------------------------------------------------------------
// Membership changes after formation

/// Deploy a reserved (or previously departed) sensor and let it join. An id
/// the network never provisioned is deployed as a keyless intruder trying to
/// join; it can never be admitted. Returns the events of this episode.
inline std::vector<Event> late_join(World& w, NodeId id, std::optional<Point> where = std::nullopt,
                                    std::uint64_t max_rounds = 40) {
  const std::size_t first_event = w.events.size();
  if (!w.is_sensor(id)) {
    const Point p = where.value_or(Point{w.placement.width / 2.0, w.placement.height / 2.0});
    w = inject_adversary_at(std::move(w), {p}, AdversaryBehavior::forge_join);
    w.events.push_back({w.round, static_cast<NodeId>(w.positions.size() - 1), "intruder",
                        "unprovisioned id " + std::to_string(id)});
    for (std::uint64_t i = 0; i < kMinRounds + 2; ++i) step_round(w);
    w.adversaries.pop_back();
    w.active.back() = false;
    w.rebuild_graph();
    return {w.events.begin() + static_cast<std::ptrdiff_t>(first_event), w.events.end()};
  }
  if (w.active[id]) throw InvalidArgument("late_join: node is already deployed");
  if (where) w.positions[id] = *where;
  w.active[id] = true;
  w.material.reserve.erase(id);
  auto it = w.nodes.find(id);
  if (it == w.nodes.end()) {
    NodeState s = make_node_state(id, w.material.ranks.at(id), w.material.rings.at(id),
                                  w.material.key_bits, w.seed);
    it = w.nodes.emplace(id, std::move(s)).first;
  }
  it->second.phase = Phase::idle;
  it->second.neighbor_dominators.clear();
  w.rebuild_graph();
  run(w, max_rounds);
  return {w.events.begin() + static_cast<std::ptrdiff_t>(first_event), w.events.end()};
}

/// A joined sensor announces its departure to its dominator and powers down.
inline std::vector<Event> leave(World& w, NodeId os, std::uint64_t max_rounds = 40) {
  const std::size_t first_event = w.events.size();
  auto it = w.nodes.find(os);
  if (it == w.nodes.end() || !w.active[os] || it->second.rank != Rank::Os ||
      it->second.phase != Phase::joined)
    return {};
  it->second.leave_requested = true;
  run(w, max_rounds);
  return {w.events.begin() + static_cast<std::ptrdiff_t>(first_event), w.events.end()};
}

// ---------------------------------------------------------------------------
// Verification

struct VerifyReport {
  bool is_dominating = false;
  bool is_wcds = false;
  bool graph_connected = false;
  double coverage_fraction = 0.0;
  std::size_t orphans = 0;
  std::size_t adopted = 0;
  std::size_t promoted = 0;
  std::size_t unresolved = 0;
};

/// Graph-core predicates on the physical graph restricted to legitimate,
/// currently deployed sensors.
inline VerifyReport verify_outcome(const World& w, const ClusterOutcome& o) {
  VerifyReport rep;
  const auto legit = w.deployed_sensors();
  const Graph sub = induced_subgraph(w.graph, legit);
  std::vector<NodeId> mapped;
  for (std::size_t i = 0; i < legit.size(); ++i)
    if (o.dominator_set.contains(legit[i])) mapped.push_back(static_cast<NodeId>(i));
  const VertexSet s(mapped);
  rep.is_dominating = is_dominating(sub, s);
  rep.is_wcds = is_wcds(sub, s);
  rep.graph_connected = is_connected(sub);
  const auto covered = closed_neighborhood(sub, s);
  const auto hit = std::count(covered.begin(), covered.end(), true);
  rep.coverage_fraction = legit.empty() ? 1.0 : static_cast<double>(hit) / legit.size();
  for (const auto& rec : o.orphan_log) {
    ++rep.orphans;
    (rec.resolution == Resolution::adopted ? rep.adopted : rep.promoted)++;
  }
  rep.unresolved = o.coverage_failures.size();
  rep.orphans += rep.unresolved;
  return rep;
}

}  // namespace wcds
