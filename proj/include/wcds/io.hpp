#pragma once

// JSON documents: run configurations, outcomes, key-material audits and the
// JSON-lines event trace.
//
// Event trace schema, one object per line:
//   {"round": <uint>, "node": <uint>, "event": <string>, "detail": <string>}

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wcds/deployment.hpp"
#include "wcds/error.hpp"
#include "wcds/graph.hpp"
#include "wcds/key_scheme.hpp"

namespace wcds {

using json = nlohmann::json;

/// Key bytes are never exported; ids suffice for audits.
inline json material_to_json(const KeyMaterial& m) {
  json groups = json::array();
  for (const auto& g : m.groups)
    groups.push_back({{"gd", g.gd}, {"members", g.members}, {"group_key_id", g.group_key_id}});
  return {{"key_bits", m.key_bits},
          {"groups", std::move(groups)},
          {"reserve", std::vector<NodeId>(m.reserve.begin(), m.reserve.end())}};
}

// ---------------------------------------------------------------------------
// Run configuration

struct AdversarySpec {
  std::size_t count = 0;
  AdversaryBehavior behavior = AdversaryBehavior::forge_join;
};

struct RunConfig {
  std::size_t groups = 1;
  std::size_t eta = 0;
  std::size_t key_bits = 128;
  double reserve_fraction = 0.0;
  PlacementMode mode = PlacementMode::group_clustered;
  std::optional<double> sigma;
  double width = 100.0;
  double height = 100.0;
  std::optional<double> radius;
  std::optional<double> target_degree;
  std::optional<Point> bs_position;
  std::vector<AdversarySpec> adversaries;
  std::size_t tau = 1;
  std::uint64_t seed = 0;
  std::uint64_t max_rounds = 50;

  std::size_t sensor_count() const { return groups * (eta + 1); }

  PlacementModel placement() const {
    PlacementModel pm;
    pm.mode = mode;
    pm.width = width;
    pm.height = height;
    if (radius)
      pm.radius = *radius;
    else
      pm.radius = radius_for_expected_degree(sensor_count(), width, height, *target_degree);
    pm.sigma = sigma.value_or(-1.0);
    pm.bs_position = bs_position;
    return pm;
  }
};

inline AdversaryBehavior parse_behavior(const std::string& s) {
  if (s == "forge_join") return AdversaryBehavior::forge_join;
  if (s == "forge_approve") return AdversaryBehavior::forge_approve;
  if (s == "replay") return AdversaryBehavior::replay;
  throw ParseError("unknown adversary behavior '" + s + "'");
}

inline RunConfig parse_run_config(const json& j) {
  try {
    RunConfig c;
    c.groups = j.at("groups").get<std::size_t>();
    c.eta = j.at("eta").get<std::size_t>();
    c.key_bits = j.value("key_bits", c.key_bits);
    c.reserve_fraction = j.value("reserve_fraction", 0.0);
    c.tau = j.value("tau", c.tau);
    c.seed = j.value("seed", c.seed);
    c.max_rounds = j.value("max_rounds", c.max_rounds);
    const json& p = j.at("placement");
    const std::string mode = p.value("mode", std::string("group_clustered"));
    if (mode == "uniform")
      c.mode = PlacementMode::uniform;
    else if (mode == "group_clustered")
      c.mode = PlacementMode::group_clustered;
    else
      throw ParseError("unknown placement mode '" + mode + "'");
    if (p.contains("sigma")) c.sigma = p.at("sigma").get<double>();
    c.width = p.value("width", c.width);
    c.height = p.value("height", c.height);
    if (p.contains("radius")) c.radius = p.at("radius").get<double>();
    if (p.contains("target_degree")) c.target_degree = p.at("target_degree").get<double>();
    if (c.radius.has_value() == c.target_degree.has_value())
      throw ParseError("placement needs exactly one of radius or target_degree");
    if (p.contains("bs")) c.bs_position = Point{p["bs"].at("x"), p["bs"].at("y")};
    if (j.contains("adversaries")) {
      const json& a = j.at("adversaries");
      auto one = [&](const json& o) {
        return AdversarySpec{o.at("count").get<std::size_t>(),
                             parse_behavior(o.value("behavior", std::string("forge_join")))};
      };
      if (a.is_array())
        for (const auto& o : a) c.adversaries.push_back(one(o));
      else if (a.is_object())
        c.adversaries.push_back(one(a));
      else if (a.is_number_integer() && a.get<std::int64_t>() >= 0)
        c.adversaries.push_back({a.get<std::size_t>(), AdversaryBehavior::forge_join});
      else
        throw ParseError("adversaries must be a count, an object or an array");
    }
    return c;
  } catch (const json::exception& e) {
    throw ParseError(std::string("run config: ") + e.what());
  }
}

inline json run_config_to_json(const RunConfig& c) {
  json p = {{"mode", c.mode == PlacementMode::uniform ? "uniform" : "group_clustered"},
            {"width", c.width},
            {"height", c.height}};
  if (c.sigma) p["sigma"] = *c.sigma;
  if (c.radius) p["radius"] = *c.radius;
  if (c.target_degree) p["target_degree"] = *c.target_degree;
  if (c.bs_position) p["bs"] = {{"x", c.bs_position->x}, {"y", c.bs_position->y}};
  json adv = json::array();
  for (const auto& a : c.adversaries)
    adv.push_back({{"count", a.count}, {"behavior", to_string(a.behavior)}});
  return {{"groups", c.groups},     {"eta", c.eta},       {"key_bits", c.key_bits},
          {"placement", p},         {"adversaries", adv}, {"tau", c.tau},
          {"seed", c.seed},         {"max_rounds", c.max_rounds},
          {"reserve_fraction", c.reserve_fraction}};
}

/// Provision, deploy, inject adversaries and run one configuration.
inline World build_world(const RunConfig& c) {
  std::vector<std::size_t> sizes(c.groups, c.eta);
  KeyMaterial m = provision(std::span<const std::size_t>(sizes), c.key_bits, c.reserve_fraction,
                            c.seed);
  World w = deploy(std::move(m), c.placement(), c.seed, c.tau);
  for (std::size_t i = 0; i < c.adversaries.size(); ++i)
    w = inject_adversary(std::move(w), c.adversaries[i].count, c.adversaries[i].behavior,
                         derive_seed(c.seed, 0xad0 + i));
  return w;
}

// ---------------------------------------------------------------------------
// Outcome and events

inline json outcome_to_json(const ClusterOutcome& o, const std::optional<VerifyReport>& v = {}) {
  json membership = json::array();
  for (auto [os, gd] : o.membership) membership.push_back({os, gd});
  json mediators = json::array();
  for (const auto& m : o.mediators)
    mediators.push_back({{"os", m.os}, {"own_gd", m.own_gd}, {"foreign_gd", m.foreign_gd}});
  json orphans = json::array();
  for (const auto& r : o.orphan_log)
    orphans.push_back({{"os", r.os}, {"resolution", to_string(r.resolution)}});
  json counts = json::object();
  for (auto [kind, n] : o.message_count) counts[to_string(kind)] = n;
  json out = {{"dominator_set", o.dominator_set.ids()},
              {"dominator_count", o.dominator_set.size()},
              {"membership", std::move(membership)},
              {"mediators", std::move(mediators)},
              {"orphan_log", std::move(orphans)},
              {"coverage_failures", o.coverage_failures},
              {"message_count", std::move(counts)},
              {"adversary_messages", o.adversary_messages},
              {"hostile_audit", o.hostile_audit},
              {"rounds", o.rounds}};
  if (v)
    out["verify"] = {{"is_dominating", v->is_dominating},
                     {"is_wcds", v->is_wcds},
                     {"graph_connected", v->graph_connected},
                     {"coverage_fraction", v->coverage_fraction},
                     {"orphans", v->orphans},
                     {"adopted", v->adopted},
                     {"promoted", v->promoted},
                     {"unresolved", v->unresolved}};
  return out;
}

inline json event_to_json(const Event& e) {
  return {{"round", e.round}, {"node", e.node}, {"event", e.event}, {"detail", e.detail}};
}

inline void write_events_jsonl(std::ostream& os, const std::vector<Event>& events) {
  for (const auto& e : events) os << event_to_json(e).dump() << '\n';
}

inline std::vector<Event> read_events_jsonl(std::istream& is) {
  std::vector<Event> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("round").get<std::uint64_t>(), j.at("node").get<NodeId>(),
                     j.at("event").get<std::string>(), j.value("detail", std::string())});
    } catch (const json::exception& e) {
      throw ParseError("event log line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace wcds
