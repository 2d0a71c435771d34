#pragma once

// Offline rank assignment and group-wise key pre-distribution.
//
// Every group is one dominator (GD) plus eta ordinary sensors (Os). An Os
// carries its individual key and its group key; the GD carries its group key
// and the individual key of every Os provisioned under it. The base station
// (BS) holds every key.
//
// Encryption is modelled, not real: a ciphertext is tagged with the id of the
// key that produced it and carries a 64-bit digest bound to the key bytes.
// Decryption succeeds only with the very same key. This captures who can read
// what, which is all the clustering protocol needs; ModeledCipher can be
// swapped for a real authenticated cipher satisfying CipherModel.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "wcds/error.hpp"
#include "wcds/graph.hpp"
#include "wcds/rng.hpp"

namespace wcds {

enum class Rank { GD, Os, GD_os, BS };

inline const char* to_string(Rank r) {
  switch (r) {
    case Rank::GD: return "GD";
    case Rank::Os: return "Os";
    case Rank::GD_os: return "GD_os";
    case Rank::BS: return "BS";
  }
  return "?";
}

using KeyId = std::uint64_t;
using Bytes = std::vector<std::uint8_t>;

struct Key {
  KeyId id = 0;
  Bytes bits;
  friend bool operator==(const Key&, const Key&) = default;
};

// Key-id namespaces. Provisioned keys count up from 1; keys minted later are
// tagged so they can never collide with provisioned ones or with each other.
inline constexpr KeyId kRekeyTag = KeyId{1} << 63;
inline constexpr KeyId kPromoteTag = KeyId{1} << 62;
inline constexpr KeyId kForeignTag = KeyId{1} << 61;

inline KeyId rekey_key_id(NodeId gd, std::uint32_t epoch) {
  return kRekeyTag | (KeyId{gd} << 24) | (epoch & 0xffffffu);
}
inline KeyId promote_key_id(NodeId node) { return kPromoteTag | (KeyId{node} << 24); }

inline bool valid_key_bits(std::size_t k) { return k == 64 || k == 128 || k == 256; }

inline Key random_key(KeyId id, std::size_t key_bits, Rng& rng) {
  Key key{id, Bytes(key_bits / 8)};
  for (std::size_t i = 0; i < key.bits.size(); i += 8) {
    std::uint64_t word = rng.next_u64();
    for (std::size_t b = 0; b < 8 && i + b < key.bits.size(); ++b)
      key.bits[i + b] = static_cast<std::uint8_t>(word >> (8 * b));
  }
  return key;
}

struct KeyRing {
  std::optional<Key> individual_key;  // Os and GD_os
  std::optional<Key> group_key;
  std::uint32_t group_epoch = 0;      // bumped on every re-key
  std::map<NodeId, Key> subordinate_keys;  // GD only
  std::set<NodeId> access_list;            // GD only
  std::optional<Key> retained_group_key;   // GD_os keeps its former group key

  std::vector<const Key*> keys() const {
    std::vector<const Key*> out;
    if (individual_key) out.push_back(&*individual_key);
    if (group_key) out.push_back(&*group_key);
    for (const auto& [id, k] : subordinate_keys) out.push_back(&k);
    if (retained_group_key) out.push_back(&*retained_group_key);
    return out;
  }
  std::size_t key_count() const { return keys().size(); }
};

struct Group {
  NodeId gd = 0;
  std::vector<NodeId> members;
  KeyId group_key_id = 0;
};

/// The base station's master table.
struct BsTable {
  std::map<KeyId, Key> keys;
  std::map<NodeId, KeyId> individual;  // Os id -> individual key id
  std::map<NodeId, KeyId> group;       // dominator id -> current group key id
  std::map<NodeId, std::vector<KeyId>> group_history;  // oldest first

  const Key* individual_of(NodeId os) const {
    auto it = individual.find(os);
    return it == individual.end() ? nullptr : &keys.at(it->second);
  }
  const Key* group_of(NodeId gd) const {
    auto it = group.find(gd);
    return it == group.end() ? nullptr : &keys.at(it->second);
  }
  /// Every group key a dominator has held, newest first.
  std::vector<const Key*> group_keys_of(NodeId gd) const {
    std::vector<const Key*> out;
    if (auto it = group_history.find(gd); it != group_history.end())
      for (auto k = it->second.rbegin(); k != it->second.rend(); ++k) out.push_back(&keys.at(*k));
    return out;
  }
  void register_group_key(NodeId gd, const Key& key) {
    keys[key.id] = key;
    group[gd] = key.id;
    group_history[gd].push_back(key.id);
  }
};

struct KeyMaterial {
  std::size_t key_bits = 128;
  std::map<NodeId, KeyRing> rings;
  std::map<NodeId, Rank> ranks;
  std::vector<Group> groups;
  BsTable bs_table;
  std::set<NodeId> reserve;
  NodeId bs_id = 0;

  /// Sensors only (GDs and Oss); the BS is not counted.
  std::size_t sensor_count() const { return bs_id; }
  std::size_t alpha() const { return groups.size(); }
  std::size_t beta() const {
    std::size_t b = 0;
    for (const auto& g : groups) b += g.members.size();
    return b;
  }

  Group* group_of_gd(NodeId gd) {
    for (auto& g : groups)
      if (g.gd == gd) return &g;
    return nullptr;
  }
  const Group* group_of_gd(NodeId gd) const {
    return const_cast<KeyMaterial*>(this)->group_of_gd(gd);
  }
  std::optional<NodeId> gd_of(NodeId os) const {
    for (const auto& g : groups)
      if (std::find(g.members.begin(), g.members.end(), os) != g.members.end()) return g.gd;
    return std::nullopt;
  }
  bool is_provisioned(NodeId id) const { return id < bs_id; }

  void remove_member(NodeId gd, NodeId os) {
    Group* g = group_of_gd(gd);
    if (!g) throw InvalidArgument("remove_member: unknown dominator");
    std::erase(g->members, os);
  }
};

/// Group sizes for n sensors in groups of one GD plus eta Oss: ceil(n/(eta+1))
/// full groups, the last one possibly smaller.
inline std::vector<std::size_t> group_sizes_for(std::size_t n, std::size_t eta) {
  std::vector<std::size_t> sizes;
  std::size_t left = n;
  while (left > 0) {
    const std::size_t take = std::min(left, eta + 1);
    sizes.push_back(take - 1);
    left -= take;
  }
  return sizes;
}

/// Offline provisioning. Node ids are assigned group by group: the GD first,
/// then its members. The BS takes the id after the last sensor. The last
/// floor(reserve_fraction * eta) members of every group are held in reserve
/// (keyed but not deployed).
inline KeyMaterial provision(std::span<const std::size_t> group_sizes, std::size_t key_bits,
                             double reserve_fraction, std::uint64_t seed) {
  if (!valid_key_bits(key_bits))
    throw InvalidArgument("provision: key_bits must be 64, 128 or 256");
  if (!(reserve_fraction >= 0.0 && reserve_fraction < 1.0))
    throw InvalidArgument("provision: reserve_fraction must lie in [0, 1)");

  KeyMaterial m;
  m.key_bits = key_bits;
  Rng rng(derive_seed(seed, 0x6b657973));  // "keys"
  KeyId next_key = 1;
  NodeId next_node = 0;

  for (std::size_t eta : group_sizes) {
    Group group;
    group.gd = next_node++;
    Key group_key = random_key(next_key++, key_bits, rng);
    group.group_key_id = group_key.id;

    KeyRing gd_ring;
    gd_ring.group_key = group_key;
    m.bs_table.register_group_key(group.gd, group_key);

    const auto reserved = static_cast<std::size_t>(std::floor(reserve_fraction * eta));
    for (std::size_t i = 0; i < eta; ++i) {
      const NodeId os = next_node++;
      Key individual = random_key(next_key++, key_bits, rng);
      KeyRing os_ring;
      os_ring.individual_key = individual;
      os_ring.group_key = group_key;
      gd_ring.subordinate_keys[os] = individual;
      gd_ring.access_list.insert(os);
      m.bs_table.keys[individual.id] = individual;
      m.bs_table.individual[os] = individual.id;
      m.rings[os] = std::move(os_ring);
      m.ranks[os] = Rank::Os;
      group.members.push_back(os);
      if (i >= eta - reserved) m.reserve.insert(os);
    }
    m.rings[group.gd] = std::move(gd_ring);
    m.ranks[group.gd] = Rank::GD;
    m.groups.push_back(std::move(group));
  }
  m.bs_id = next_node;
  m.ranks[m.bs_id] = Rank::BS;
  return m;
}

inline KeyMaterial provision(std::initializer_list<std::size_t> group_sizes, std::size_t key_bits,
                             double reserve_fraction, std::uint64_t seed) {
  const std::vector<std::size_t> sizes(group_sizes);
  return provision(std::span<const std::size_t>(sizes), key_bits, reserve_fraction, seed);
}

/// Number of distinct keys in a provisioning.
inline std::size_t distinct_key_count(const KeyMaterial& m) {
  std::set<KeyId> ids;
  for (const auto& [node, ring] : m.rings)
    for (const Key* k : ring.keys()) ids.insert(k->id);
  return ids.size();
}

// ---------------------------------------------------------------------------
// Storage accounting

inline std::uint64_t gd_storage_bits(std::uint64_t eta, std::uint64_t k) { return (eta + 1) * k; }
inline std::uint64_t os_storage_bits(std::uint64_t k) { return 2 * k; }
inline std::uint64_t network_storage_bits(std::uint64_t alpha, std::uint64_t beta,
                                          std::uint64_t eta, std::uint64_t k) {
  return k * (alpha * (eta + 1) + 2 * beta);
}

struct StorageReport {
  std::vector<std::uint64_t> per_gd;  // in group order
  std::uint64_t per_os = 0;
  std::uint64_t total = 0;
};

inline StorageReport storage_bits(const KeyMaterial& m) {
  StorageReport r;
  const std::uint64_t k = m.key_bits;
  for (const auto& g : m.groups) r.per_gd.push_back(m.rings.at(g.gd).key_count() * k);
  r.per_os = os_storage_bits(k);
  for (const auto& [node, ring] : m.rings) r.total += ring.key_count() * k;
  return r;
}

// ---------------------------------------------------------------------------
// Modelled cipher

enum class MessageKind : std::uint8_t {
  JOIN_REQ = 1,
  JOIN_APRV,
  GD_ERR,
  ORP_ERR,
  ADOPT_CMD,
  PROMOTE_CMD,
  REKEY,
  LEAVE,
  REPORT,
};

inline constexpr std::size_t kMessageKinds = 9;

inline const char* to_string(MessageKind k) {
  switch (k) {
    case MessageKind::JOIN_REQ: return "JOIN_REQ";
    case MessageKind::JOIN_APRV: return "JOIN_APRV";
    case MessageKind::GD_ERR: return "GD_ERR";
    case MessageKind::ORP_ERR: return "ORP_ERR";
    case MessageKind::ADOPT_CMD: return "ADOPT_CMD";
    case MessageKind::PROMOTE_CMD: return "PROMOTE_CMD";
    case MessageKind::REKEY: return "REKEY";
    case MessageKind::LEAVE: return "LEAVE";
    case MessageKind::REPORT: return "REPORT";
  }
  return "?";
}

struct Ciphertext {
  KeyId key_id = 0;
  Bytes payload;
  std::uint64_t auth_tag = 0;
  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

enum class CipherStatus { ok, authentication_failure, malformed };

struct DecryptResult {
  CipherStatus status = CipherStatus::malformed;
  MessageKind kind{};
  Bytes body;
  bool ok() const { return status == CipherStatus::ok; }
};

template <typename C>
concept CipherModel = requires(const Key& key, MessageKind kind, std::span<const std::uint8_t> body,
                               const Ciphertext& c) {
  { C::encrypt(key, kind, body) } -> std::same_as<Ciphertext>;
  { C::decrypt(key, c) } -> std::same_as<DecryptResult>;
};

struct ModeledCipher {
  static std::uint64_t digest(const Key& key, std::span<const std::uint8_t> payload) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    auto feed = [&h](std::uint8_t b) {
      h ^= b;
      h *= 0x100000001b3ULL;
    };
    for (int i = 0; i < 8; ++i) feed(static_cast<std::uint8_t>(key.id >> (8 * i)));
    for (auto b : key.bits) feed(b);
    for (auto b : payload) feed(b);
    return mix64(h);
  }

  static void apply_keystream(const Key& key, std::span<std::uint8_t> data) {
    std::uint64_t state = digest(key, {});
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (i % 8 == 0) state = mix64(state);
      data[i] ^= static_cast<std::uint8_t>(state >> (8 * (i % 8)));
    }
  }

  static Ciphertext encrypt(const Key& key, MessageKind kind, std::span<const std::uint8_t> body) {
    Ciphertext c;
    c.key_id = key.id;
    c.payload.reserve(body.size() + 1);
    c.payload.push_back(static_cast<std::uint8_t>(kind));
    c.payload.insert(c.payload.end(), body.begin(), body.end());
    apply_keystream(key, c.payload);
    c.auth_tag = digest(key, c.payload);
    return c;
  }

  static DecryptResult decrypt(const Key& key, const Ciphertext& c) {
    DecryptResult r;
    if (c.payload.empty()) return r;  // malformed
    if (key.id != c.key_id || digest(key, c.payload) != c.auth_tag) {
      r.status = CipherStatus::authentication_failure;
      return r;
    }
    Bytes plain = c.payload;
    apply_keystream(key, plain);
    const auto kind = plain.front();
    if (kind < 1 || kind > kMessageKinds) return r;  // malformed
    r.status = CipherStatus::ok;
    r.kind = static_cast<MessageKind>(kind);
    r.body.assign(plain.begin() + 1, plain.end());
    return r;
  }
};

static_assert(CipherModel<ModeledCipher>);

inline Ciphertext encrypt(const Key& key, MessageKind kind, std::span<const std::uint8_t> body) {
  return ModeledCipher::encrypt(key, kind, body);
}
inline DecryptResult decrypt(const Key& key, const Ciphertext& c) {
  return ModeledCipher::decrypt(key, c);
}

/// Indices of the ciphertexts in `log` that any key held in `ring` opens.
inline std::vector<std::size_t> decryptable_by(const KeyRing& ring,
                                               std::span<const Ciphertext> log) {
  std::vector<std::size_t> out;
  const auto keys = ring.keys();
  for (std::size_t i = 0; i < log.size(); ++i) {
    for (const Key* k : keys) {
      if (decrypt(*k, log[i]).ok()) {
        out.push_back(i);
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Message bodies: little-endian u64 words, optionally followed by one key.

class BodyWriter {
 public:
  BodyWriter& u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return *this;
  }
  BodyWriter& key(const Key& k) {
    u64(k.id).u64(k.bits.size());
    bytes_.insert(bytes_.end(), k.bits.begin(), k.bits.end());
    return *this;
  }
  Bytes take() { return std::move(bytes_); }

 private:
  Bytes bytes_;
};

class BodyReader {
 public:
  explicit BodyReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::optional<std::uint64_t> u64() {
    if (pos_ + 8 > bytes_.size()) return std::nullopt;
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  std::optional<Key> key() {
    auto id = u64();
    auto len = u64();
    if (!id || !len || pos_ + *len > bytes_.size()) return std::nullopt;
    Key k{*id, Bytes(bytes_.begin() + pos_, bytes_.begin() + pos_ + *len)};
    pos_ += *len;
    return k;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Re-keying

/// REKEY body: (gd, epoch, round, key).
struct RekeyNotice {
  NodeId gd = 0;
  std::uint32_t epoch = 0;
  std::uint64_t round = 0;
  Key key;
};

inline Bytes encode_rekey(const RekeyNotice& n) {
  return BodyWriter().u64(n.gd).u64(n.epoch).u64(n.round).key(n.key).take();
}

inline std::optional<RekeyNotice> decode_rekey(std::span<const std::uint8_t> body) {
  BodyReader r(body);
  auto gd = r.u64();
  auto epoch = r.u64();
  auto round = r.u64();
  auto key = r.key();
  if (!gd || !epoch || !round || !key || !r.done()) return std::nullopt;
  return RekeyNotice{static_cast<NodeId>(*gd), static_cast<std::uint32_t>(*epoch), *round,
                     std::move(*key)};
}

struct RekeyMessage {
  std::optional<NodeId> recipient;  // nullopt: local broadcast
  Ciphertext ciphertext;
};

struct RekeyResult {
  Key new_key;
  std::vector<RekeyMessage> messages;
};

/// Replace the group key held in `gd_ring`.
///
/// Join mode (`joining` set): the joiner gets the new key under its individual
/// key; existing `members` get one local broadcast under the old group key.
/// Leave mode: every remaining member gets a unicast under its own individual
/// key, so a departed node holding the old group key learns nothing.
inline RekeyResult rekey_ring(KeyRing& gd_ring, NodeId gd, std::optional<NodeId> joining,
                              std::span<const NodeId> members, std::size_t key_bits, Rng& rng,
                              std::uint64_t round = 0) {
  RekeyResult out;
  const std::uint32_t epoch = gd_ring.group_epoch + 1;
  out.new_key = random_key(rekey_key_id(gd, epoch), key_bits, rng);
  const Bytes body = encode_rekey({gd, epoch, round, out.new_key});

  if (joining) {
    auto it = gd_ring.subordinate_keys.find(*joining);
    if (it == gd_ring.subordinate_keys.end())
      throw InvalidArgument("rekey: joining node's individual key is not installed");
    out.messages.push_back({*joining, encrypt(it->second, MessageKind::REKEY, body)});
    const bool others = std::any_of(members.begin(), members.end(),
                                    [&](NodeId m) { return m != *joining; });
    if (others && gd_ring.group_key)
      out.messages.push_back({std::nullopt, encrypt(*gd_ring.group_key, MessageKind::REKEY, body)});
  } else {
    for (NodeId m : members) {
      auto it = gd_ring.subordinate_keys.find(m);
      if (it == gd_ring.subordinate_keys.end()) continue;
      out.messages.push_back({m, encrypt(it->second, MessageKind::REKEY, body)});
    }
  }
  gd_ring.group_key = out.new_key;
  gd_ring.group_epoch = epoch;
  return out;
}

/// Re-key a provisioned group and apply the result to the material: the GD
/// ring, the BS table, and the rings of every node that receives the notice.
/// A joining node absent from the GD's table is admitted with the individual
/// key the BS holds for it.
inline RekeyResult rekey_group(KeyMaterial& m, NodeId gd, std::optional<NodeId> joining, Rng& rng) {
  auto rank = m.ranks.find(gd);
  Group* group = m.group_of_gd(gd);
  if (rank == m.ranks.end() || (rank->second != Rank::GD && rank->second != Rank::GD_os) || !group)
    throw InvalidArgument("rekey_group: node is not a group dominator");
  KeyRing& ring = m.rings.at(gd);

  if (joining) {
    if (!ring.subordinate_keys.contains(*joining)) {
      const Key* k = m.bs_table.individual_of(*joining);
      if (!k) throw InvalidArgument("rekey_group: joining node is not provisioned");
      ring.subordinate_keys[*joining] = *k;
      ring.access_list.insert(*joining);
    }
    m.reserve.erase(*joining);
    if (std::find(group->members.begin(), group->members.end(), *joining) == group->members.end())
      group->members.push_back(*joining);
  }

  std::vector<NodeId> current;
  for (NodeId os : group->members)
    if (!m.reserve.contains(os)) current.push_back(os);

  RekeyResult out = rekey_ring(ring, gd, joining, current, m.key_bits, rng);
  m.bs_table.register_group_key(gd, out.new_key);
  group->group_key_id = out.new_key.id;
  for (NodeId os : current) {
    KeyRing& r = m.rings.at(os);
    r.group_key = out.new_key;
    r.group_epoch = ring.group_epoch;
  }
  return out;
}

}  // namespace wcds
