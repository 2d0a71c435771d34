#pragma once

// Secure cluster formation.
//
// Three transition functions, one per role, each mapping
// (state, inbox, round) to (state, outbox, events):
//
//   os_step  broadcast JOIN_REQ under the individual key; accept a JOIN_APRV
//            that opens under the group key and names this node; remember
//            every hop-1 dominator whose approvals do not open (foreign
//            dominators); after the approval timeout, flood GD_ERR to the BS
//            listing those dominators.
//   gd_step  approve own-group JOIN_REQs; record foreign hop-1 requesters as
//            mediators; report hop-1 GD_ERRs to the BS as ORP_ERR; adopt an
//            orphan when the BS hands over its individual key; re-key on
//            every post-formation join and on every leave.
//   bs_step  match GD_ERR with ORP_ERR for the same orphan inside a fixed
//            window; pick an adopter (preferring dominators the orphan itself
//            saw, then the smallest id) or promote the orphan to GD_os.
//
// The mediator rule follows the prose definition (a node covered by its own
// dominator and a foreign one), not the unguarded pseudo-code clause that
// would mark every subordinate as a mediator.
//
// Sender id and message kind travel in the clear; bodies are encrypted. Every
// body starts with the round it was sent in and receivers drop anything not
// sent in the previous round, so captured traffic cannot be replayed.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "wcds/error.hpp"
#include "wcds/graph.hpp"
#include "wcds/key_scheme.hpp"
#include "wcds/rng.hpp"

namespace wcds {

inline constexpr std::uint64_t kApprovalTimeout = 2;
inline constexpr std::uint64_t kMatchWindow = 4;

enum class Route : std::uint8_t { local, direct, flood };

struct Envelope {
  NodeId sender = 0;  // claimed origin, never trusted for admission
  MessageKind kind = MessageKind::JOIN_REQ;
  Ciphertext ciphertext;
  Route route = Route::local;
  std::optional<NodeId> to;  // direct and flood destination
  std::uint32_t hops = 1;    // stamped by the transport on delivery
  std::uint64_t uid = 0;     // stamped by the transport on send
};

struct Event {
  std::uint64_t round = 0;
  NodeId node = 0;
  std::string event;
  std::string detail;
  friend bool operator==(const Event&, const Event&) = default;
};

enum class Phase { idle, awaiting_approval, joined, orphan, promoted, left };
enum class Resolution { joined, adopted, promoted };

inline const char* to_string(Phase p) {
  switch (p) {
    case Phase::idle: return "idle";
    case Phase::awaiting_approval: return "awaiting_approval";
    case Phase::joined: return "joined";
    case Phase::orphan: return "orphan";
    case Phase::promoted: return "promoted";
    case Phase::left: return "left";
  }
  return "?";
}

inline const char* to_string(Resolution r) {
  switch (r) {
    case Resolution::joined: return "joined";
    case Resolution::adopted: return "adopted";
    case Resolution::promoted: return "promoted";
  }
  return "?";
}

struct NodeState {
  NodeId id = 0;
  Rank rank = Rank::Os;
  KeyRing ring;
  std::size_t key_bits = 128;

  // Os
  Phase phase = Phase::idle;
  std::optional<NodeId> dominator;
  std::set<NodeId> neighbor_dominators;
  std::optional<Resolution> resolution;
  std::uint64_t start_round = 0;  // round of the JOIN_REQ
  bool leave_requested = false;

  // GD / GD_os
  std::set<NodeId> subordinates;
  std::set<NodeId> mediators;
  std::set<NodeId> reported_orphans;
  std::uint64_t formation_end = kApprovalTimeout;  // later joins trigger a re-key
  std::size_t tau = 1;
  Rng rng;
};

inline NodeState make_node_state(NodeId id, Rank rank, KeyRing ring, std::size_t key_bits,
                                 std::uint64_t seed) {
  NodeState s;
  s.id = id;
  s.rank = rank;
  s.ring = std::move(ring);
  s.key_bits = key_bits;
  s.rng = Rng(derive_seed(seed, 0x6e6f6465ULL + id));
  return s;
}

struct Step {
  NodeState state;
  std::vector<Envelope> outbox;
  std::vector<Event> events;
  std::vector<Key> escrow;  // new group keys, registered with the BS out of band
};

// ---------------------------------------------------------------------------
// Message bodies

namespace msg {

inline Envelope make(NodeId sender, MessageKind kind, const Key& key, const Bytes& body,
                     Route route, std::optional<NodeId> to = std::nullopt) {
  Envelope e;
  e.sender = sender;
  e.kind = kind;
  e.ciphertext = encrypt(key, kind, body);
  e.route = route;
  e.to = to;
  return e;
}

inline bool fresh(std::uint64_t sent, std::uint64_t now) { return sent + 1 == now; }

/// Decrypt and split into u64 words; nullopt unless the kind matches.
inline std::optional<std::vector<std::uint64_t>> open_words(const Key& key, const Envelope& e) {
  auto d = decrypt(key, e.ciphertext);
  if (!d.ok() || d.kind != e.kind) return std::nullopt;
  BodyReader r(d.body);
  std::vector<std::uint64_t> words;
  while (!r.done()) {
    auto w = r.u64();
    if (!w) return std::nullopt;
    words.push_back(*w);
  }
  return words;
}

}  // namespace msg

// ---------------------------------------------------------------------------
// Os

/// Processes REKEY before anything else so a key delivered this round opens
/// same-round approvals.
inline std::vector<const Envelope*> rekey_first(std::span<const Envelope> inbox) {
  std::vector<const Envelope*> order;
  for (const auto& e : inbox)
    if (e.kind == MessageKind::REKEY) order.push_back(&e);
  for (const auto& e : inbox)
    if (e.kind != MessageKind::REKEY) order.push_back(&e);
  return order;
}

inline Step os_step(NodeState state, std::span<const Envelope> inbox, std::uint64_t round) {
  if (state.rank != Rank::Os) throw InvalidArgument("os_step: node is not an ordinary sensor");
  Step out;
  auto& s = state;
  auto event = [&](std::string name, std::string detail = {}) {
    out.events.push_back({round, s.id, std::move(name), std::move(detail)});
  };

  if (s.phase == Phase::left) {
    out.state = std::move(state);
    return out;
  }

  for (const Envelope* e : rekey_first(inbox)) {
    switch (e->kind) {
      case MessageKind::REKEY: {
        // Unicast under the individual key: admission, adoption, or a
        // leave-triggered rotation. Broadcast under the group key: rotation
        // announced by the current dominator.
        bool via_individual = false;
        std::optional<RekeyNotice> notice;
        if (s.ring.individual_key) {
          auto d = decrypt(*s.ring.individual_key, e->ciphertext);
          if (d.ok() && d.kind == MessageKind::REKEY) {
            notice = decode_rekey(d.body);
            via_individual = true;
          }
        }
        if (!notice && s.ring.group_key && s.phase == Phase::joined) {
          auto d = decrypt(*s.ring.group_key, e->ciphertext);
          if (d.ok() && d.kind == MessageKind::REKEY) notice = decode_rekey(d.body);
        }
        if (!notice || !msg::fresh(notice->round, round)) break;
        if (!via_individual && notice->gd != s.dominator) break;
        const bool same_gd = s.dominator && *s.dominator == notice->gd;
        if (same_gd && s.phase == Phase::joined && notice->epoch <= s.ring.group_epoch) break;

        s.ring.group_key = notice->key;
        s.ring.group_epoch = notice->epoch;
        if (s.phase != Phase::joined || !same_gd) {
          s.resolution = s.phase == Phase::orphan ? Resolution::adopted : Resolution::joined;
          s.dominator = notice->gd;
          s.phase = Phase::joined;
          event(s.resolution == Resolution::adopted ? "adopted" : "joined",
                "dominator=" + std::to_string(notice->gd));
        } else {
          event("rekeyed", "epoch=" + std::to_string(notice->epoch));
        }
        break;
      }
      case MessageKind::JOIN_APRV: {
        if (e->hops != 1 || !s.ring.group_key) break;
        auto words = msg::open_words(*s.ring.group_key, *e);
        if (!words) {
          // Approval under a group key we do not hold: a foreign dominator.
          if (e->sender != s.dominator && s.neighbor_dominators.insert(e->sender).second)
            event("neighbor_dominator", "gd=" + std::to_string(e->sender));
          break;
        }
        // (round, gd, member, request round)
        if (words->size() != 4 || !msg::fresh((*words)[0], round)) break;
        const auto gd = static_cast<NodeId>((*words)[1]);
        if (gd != e->sender || (*words)[2] != s.id || (*words)[3] != s.start_round) break;
        if (s.phase != Phase::awaiting_approval) break;
        s.dominator = gd;
        s.phase = Phase::joined;
        s.resolution = Resolution::joined;
        s.neighbor_dominators.erase(gd);
        event("joined", "dominator=" + std::to_string(gd));
        break;
      }
      case MessageKind::PROMOTE_CMD: {
        if (!s.ring.individual_key || e->to != s.id) break;
        auto d = decrypt(*s.ring.individual_key, e->ciphertext);
        if (!d.ok() || d.kind != MessageKind::PROMOTE_CMD) break;
        BodyReader r(d.body);
        auto sent = r.u64();
        auto node = r.u64();
        auto key = r.key();
        if (!sent || !node || !key || *node != s.id || !msg::fresh(*sent, round)) break;
        if (s.phase != Phase::orphan) break;
        s.rank = Rank::GD_os;
        s.ring.retained_group_key = s.ring.group_key;
        s.ring.group_key = *key;
        s.ring.group_epoch = 0;
        s.phase = Phase::promoted;
        s.resolution = Resolution::promoted;
        s.dominator.reset();
        s.formation_end = round;
        event("promoted", "rank=GD_os");
        break;
      }
      default:
        break;
    }
  }

  if (s.rank == Rank::Os) {
    if (s.phase == Phase::idle && s.ring.individual_key) {
      s.start_round = round;
      s.phase = Phase::awaiting_approval;
      out.outbox.push_back(msg::make(s.id, MessageKind::JOIN_REQ, *s.ring.individual_key,
                                     BodyWriter().u64(round).u64(s.id).take(), Route::local));
      event("join_req");
    } else if (s.phase == Phase::awaiting_approval && round >= s.start_round + kApprovalTimeout) {
      BodyWriter w;
      w.u64(round).u64(s.id).u64(s.neighbor_dominators.size());
      std::string seen;
      for (NodeId g : s.neighbor_dominators) {
        w.u64(g);
        seen += (seen.empty() ? "" : ",") + std::to_string(g);
      }
      s.phase = Phase::orphan;
      out.outbox.push_back(msg::make(s.id, MessageKind::GD_ERR, *s.ring.individual_key, w.take(),
                                     Route::flood, std::nullopt));
      event("gd_err", "seen=[" + seen + "]");
    } else if (s.phase == Phase::joined && s.leave_requested && s.dominator) {
      out.outbox.push_back(msg::make(s.id, MessageKind::LEAVE, *s.ring.individual_key,
                                     BodyWriter().u64(round).u64(s.id).take(), Route::direct,
                                     *s.dominator));
      event("leave", "dominator=" + std::to_string(*s.dominator));
      s.phase = Phase::left;
      s.dominator.reset();
      s.resolution.reset();
      s.leave_requested = false;
    }
  }
  out.state = std::move(state);
  return out;
}

/// Envelope for a sensed report sent by a joined Os to its dominator.
inline Envelope make_report(const NodeState& os, std::span<const std::uint8_t> body,
                            std::uint64_t round) {
  if (!os.ring.individual_key || !os.dominator)
    throw InvalidArgument("make_report: sender is not a joined sensor");
  Bytes plain = BodyWriter().u64(round).u64(os.id).take();
  plain.insert(plain.end(), body.begin(), body.end());
  return msg::make(os.id, MessageKind::REPORT, *os.ring.individual_key, plain, Route::direct,
                   *os.dominator);
}

// ---------------------------------------------------------------------------
// GD and GD_os

namespace detail {

inline void admit_with_rekey(Step& out, NodeState& s, NodeId joiner, std::uint64_t round) {
  std::vector<NodeId> members;
  for (NodeId m : s.subordinates)
    if (m != joiner) members.push_back(m);
  RekeyResult rk = rekey_ring(s.ring, s.id, joiner, members, s.key_bits, s.rng, round);
  for (auto& m : rk.messages) {
    Envelope e;
    e.sender = s.id;
    e.kind = MessageKind::REKEY;
    e.ciphertext = std::move(m.ciphertext);
    e.route = m.recipient ? Route::direct : Route::local;
    e.to = m.recipient;
    out.outbox.push_back(std::move(e));
  }
  out.escrow.push_back(rk.new_key);
  out.events.push_back({round, s.id, "rekey", "epoch=" + std::to_string(s.ring.group_epoch) +
                                                  " join=" + std::to_string(joiner)});
}

inline Envelope approval(const NodeState& s, NodeId member, std::uint64_t request_round,
                         std::uint64_t round) {
  return msg::make(s.id, MessageKind::JOIN_APRV, *s.ring.group_key,
                   BodyWriter().u64(round).u64(s.id).u64(member).u64(request_round).take(),
                   Route::local);
}

}  // namespace detail

inline Step gd_step(NodeState state, std::span<const Envelope> inbox, std::uint64_t round) {
  if (state.rank != Rank::GD && state.rank != Rank::GD_os)
    throw InvalidArgument("gd_step: node is not a dominator");
  Step out;
  auto& s = state;
  auto event = [&](std::string name, std::string detail = {}) {
    out.events.push_back({round, s.id, std::move(name), std::move(detail)});
  };

  // Commands in this inbox were encrypted before any re-key done below.
  const std::optional<Key> inbound_group_key = s.ring.group_key;

  for (const Envelope& e : inbox) {
    switch (e.kind) {
      case MessageKind::JOIN_REQ: {
        if (e.hops != 1) break;
        std::optional<std::vector<std::uint64_t>> words;
        if (auto it = s.ring.subordinate_keys.find(e.sender); it != s.ring.subordinate_keys.end())
          words = msg::open_words(it->second, e);
        if (!words) {
          if (s.mediators.insert(e.sender).second)
            event("mediator", "os=" + std::to_string(e.sender));
          break;
        }
        // (round, os)
        if (words->size() != 2 || (*words)[1] != e.sender || !msg::fresh((*words)[0], round)) break;
        if (!s.ring.access_list.contains(e.sender)) break;
        const NodeId os = e.sender;
        if (s.subordinates.insert(os).second) {
          if (round > s.formation_end) detail::admit_with_rekey(out, s, os, round);
          event("approve", "os=" + std::to_string(os));
        }
        out.outbox.push_back(detail::approval(s, os, (*words)[0], round));
        break;
      }
      case MessageKind::GD_ERR: {
        if (e.hops != 1 || !s.ring.group_key) break;
        if (!s.reported_orphans.insert(e.sender).second) break;
        out.outbox.push_back(msg::make(s.id, MessageKind::ORP_ERR, *s.ring.group_key,
                                       BodyWriter().u64(round).u64(s.id).u64(e.sender).take(),
                                       Route::flood));
        event("orp_err", "orphan=" + std::to_string(e.sender));
        break;
      }
      case MessageKind::ADOPT_CMD: {
        if (e.to != s.id || !inbound_group_key) break;
        auto d = decrypt(*inbound_group_key, e.ciphertext);
        if (!d.ok() || d.kind != MessageKind::ADOPT_CMD) break;
        BodyReader r(d.body);
        auto sent = r.u64();
        auto orphan = r.u64();
        auto key = r.key();
        if (!sent || !orphan || !key || !msg::fresh(*sent, round)) break;
        const auto os = static_cast<NodeId>(*orphan);
        if (s.subordinates.contains(os)) {
          event("adopt_noop", "os=" + std::to_string(os));
          break;
        }
        s.ring.subordinate_keys[os] = *key;
        s.ring.access_list.insert(os);
        s.subordinates.insert(os);
        detail::admit_with_rekey(out, s, os, round);
        out.outbox.push_back(detail::approval(s, os, 0, round));
        event("adopt", "os=" + std::to_string(os));
        break;
      }
      case MessageKind::LEAVE: {
        if (e.to != s.id) break;
        auto it = s.ring.subordinate_keys.find(e.sender);
        if (it == s.ring.subordinate_keys.end()) break;
        auto words = msg::open_words(it->second, e);
        if (!words || words->size() != 2 || (*words)[1] != e.sender ||
            !msg::fresh((*words)[0], round))
          break;
        if (s.subordinates.erase(e.sender) == 0) break;
        std::vector<NodeId> members(s.subordinates.begin(), s.subordinates.end());
        RekeyResult rk = rekey_ring(s.ring, s.id, std::nullopt, members, s.key_bits, s.rng, round);
        for (auto& m : rk.messages)
          out.outbox.push_back({s.id, MessageKind::REKEY, std::move(m.ciphertext), Route::direct,
                                m.recipient, 1, 0});
        out.escrow.push_back(rk.new_key);
        event("member_left", "os=" + std::to_string(e.sender));
        event("rekey", "epoch=" + std::to_string(s.ring.group_epoch) +
                           " leave=" + std::to_string(e.sender));
        break;
      }
      default:
        break;
    }
  }
  out.state = std::move(state);
  return out;
}

/// True iff at least tau distinct subordinates sent byte-identical report
/// bodies that authenticate under their individual keys.
inline bool validate_report(const NodeState& gd, std::span<const Envelope> reports) {
  if (gd.rank != Rank::GD && gd.rank != Rank::GD_os)
    throw InvalidArgument("validate_report: node is not a dominator");
  if (gd.tau < 1) throw InvalidArgument("validate_report: tau must be >= 1");
  std::map<Bytes, std::set<NodeId>> senders_by_body;
  for (const Envelope& e : reports) {
    if (e.kind != MessageKind::REPORT || !gd.subordinates.contains(e.sender)) continue;
    auto it = gd.ring.subordinate_keys.find(e.sender);
    if (it == gd.ring.subordinate_keys.end()) continue;
    auto d = decrypt(it->second, e.ciphertext);
    if (!d.ok() || d.kind != MessageKind::REPORT) continue;
    BodyReader r(d.body);
    r.u64();
    auto os = r.u64();
    if (!os || *os != e.sender || d.body.size() < 16) continue;
    senders_by_body[Bytes(d.body.begin() + 16, d.body.end())].insert(e.sender);
  }
  return std::any_of(senders_by_body.begin(), senders_by_body.end(),
                     [&](const auto& kv) { return kv.second.size() >= gd.tau; });
}

// ---------------------------------------------------------------------------
// Base station

struct PendingOrphan {
  std::uint64_t received = 0;  // round the GD_ERR reached the BS
  std::uint64_t sent = 0;      // round the orphan sent it
  std::vector<NodeId> observed;
};

struct BsState {
  NodeId id = 0;
  BsTable table;
  std::size_t key_bits = 128;
  Rng rng;
  std::map<NodeId, PendingOrphan> pending;
  std::map<NodeId, std::map<NodeId, std::uint64_t>> reports;  // orphan -> gd -> heard round
  std::set<NodeId> resolved;
  std::vector<NodeId> hostile;  // ids that failed authentication

  bool busy() const { return !pending.empty(); }
};

inline BsState make_bs_state(const KeyMaterial& m, std::uint64_t seed) {
  BsState bs;
  bs.id = m.bs_id;
  bs.table = m.bs_table;
  bs.key_bits = m.key_bits;
  bs.rng = Rng(derive_seed(seed, 0x6261736573ULL));
  return bs;
}

struct BsStep {
  BsState state;
  std::vector<Envelope> outbox;
  std::vector<Event> events;
};

inline BsStep bs_step(BsState state, std::span<const Envelope> inbox, std::uint64_t round) {
  BsStep out;
  auto& bs = state;
  auto event = [&](std::string name, std::string detail = {}) {
    out.events.push_back({round, bs.id, std::move(name), std::move(detail)});
  };
  auto audit = [&](NodeId who, const char* why) {
    if (std::find(bs.hostile.begin(), bs.hostile.end(), who) == bs.hostile.end())
      bs.hostile.push_back(who);
    event("audit_hostile", std::string(why) + " id=" + std::to_string(who));
  };

  for (const Envelope& e : inbox) {
    if (e.kind == MessageKind::GD_ERR) {
      const Key* key = bs.table.individual_of(e.sender);
      if (!key) {
        audit(e.sender, "gd_err_unknown_sender");
        continue;
      }
      auto words = msg::open_words(*key, e);
      // (round, os, count, gd...)
      if (!words || words->size() < 3 || (*words)[1] != e.sender ||
          words->size() != 3 + (*words)[2] || !msg::fresh((*words)[0], round)) {
        audit(e.sender, "gd_err_unauthenticated");
        continue;
      }
      if (bs.pending.contains(e.sender)) continue;
      PendingOrphan p{round, (*words)[0], {}};
      for (std::size_t i = 3; i < words->size(); ++i)
        p.observed.push_back(static_cast<NodeId>((*words)[i]));
      bs.pending[e.sender] = std::move(p);
      event("orphan_reported", "os=" + std::to_string(e.sender));
    } else if (e.kind == MessageKind::ORP_ERR) {
      // The reporter may have re-keyed since sending; try its recent keys.
      const auto keys = bs.table.group_keys_of(e.sender);
      if (keys.empty()) {
        audit(e.sender, "orp_err_unknown_sender");
        continue;
      }
      std::optional<std::vector<std::uint64_t>> words;
      for (const Key* key : keys)
        if ((words = msg::open_words(*key, e))) break;
      // (round, gd, orphan)
      if (!words || words->size() != 3 || (*words)[1] != e.sender ||
          !msg::fresh((*words)[0], round)) {
        audit(e.sender, "orp_err_unauthenticated");
        continue;
      }
      bs.reports[static_cast<NodeId>((*words)[2])][e.sender] = (*words)[0];
    }
  }

  // Orphan ids reported by dominators but unknown to the BS are hostile.
  for (auto it = bs.reports.begin(); it != bs.reports.end();) {
    if (!bs.table.individual_of(it->first)) {
      audit(it->first, "orp_err_unknown_orphan");
      it = bs.reports.erase(it);
    } else {
      ++it;
    }
  }

  for (auto it = bs.pending.begin(); it != bs.pending.end();) {
    const NodeId orphan = it->first;
    const PendingOrphan& p = it->second;
    if (round < p.received + kMatchWindow) {
      ++it;
      continue;
    }
    // A genuine hop-1 report is made in the round right after the GD_ERR was sent.
    std::vector<NodeId> candidates;
    if (auto r = bs.reports.find(orphan); r != bs.reports.end())
      for (auto [gd, heard] : r->second)
        if (heard == p.sent + 1) candidates.push_back(gd);
    std::vector<NodeId> preferred;
    for (NodeId gd : candidates)
      if (std::find(p.observed.begin(), p.observed.end(), gd) != p.observed.end())
        preferred.push_back(gd);
    const auto& pool = preferred.empty() ? candidates : preferred;

    const Key* individual = bs.table.individual_of(orphan);
    if (!pool.empty()) {
      const NodeId adopter = *std::min_element(pool.begin(), pool.end());
      const Key* gk = bs.table.group_of(adopter);
      out.outbox.push_back(msg::make(bs.id, MessageKind::ADOPT_CMD, *gk,
                                     BodyWriter().u64(round).u64(orphan).key(*individual).take(),
                                     Route::flood, adopter));
      event("adopt_cmd", "os=" + std::to_string(orphan) + " adopter=" + std::to_string(adopter));
    } else {
      Key fresh_group = random_key(promote_key_id(orphan), bs.key_bits, bs.rng);
      bs.table.register_group_key(orphan, fresh_group);
      out.outbox.push_back(msg::make(bs.id, MessageKind::PROMOTE_CMD, *individual,
                                     BodyWriter().u64(round).u64(orphan).key(fresh_group).take(),
                                     Route::flood, orphan));
      event("promote_cmd", "os=" + std::to_string(orphan));
    }
    bs.resolved.insert(orphan);
    bs.reports.erase(orphan);
    it = bs.pending.erase(it);
  }

  out.state = std::move(state);
  return out;
}

}  // namespace wcds
