// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "wcds/wcds.hpp"

using namespace wcds;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream ss;
  ss.precision(prec);
  ss << std::fixed << v;
  return ss.str();
}

// --- 1: minimum WCDS never exceeds minimum CDS ----------------------------------

Verdict weak_vs_strict() {
  const auto t0 = Clock::now();
  Verdict v;
  std::size_t graphs = 0, strict = 0, violations = 0;
  for (std::uint64_t seed = 0; graphs < 200; ++seed) {
    Rng rng(derive_seed(0xacce551, seed));
    const std::size_t n = 4 + rng.below(9);  // 4..12
    const double side = 100.0;
    const double r = radius_for_expected_degree(n, side, side, 2.0 + rng.uniform() * 3.0);
    const Graph g = gen_udg(n, side, side, r, derive_seed(seed, 1));
    if (!is_connected(g)) continue;
    ++graphs;
    const std::size_t w = brute_min_ds(g, DomMode::wcds).size();
    const std::size_t c = brute_min_ds(g, DomMode::cds).size();
    if (w > c) ++violations;
    if (w < c) ++strict;
  }
  const double secs = seconds_since(t0);
  v.pass = violations == 0 && strict >= 1 && secs < 60.0;
  v.detail = std::to_string(graphs) + " graphs, " + std::to_string(violations) + " violations, " +
             std::to_string(strict) + " strict, " + fmt(secs, 1) + " s";
  return v;
}

// --- 2: ideal deployments ------------------------------------------------------

Verdict ideal_counts() {
  Verdict v;
  const struct {
    std::size_t n, eta, expected;
  } cases[] = {{100, 9, 10}, {101, 9, 11}, {60, 5, 10}};
  for (const auto& c : cases) {
    const auto sizes = group_sizes_for(c.n, c.eta);
    PlacementModel pm;
    pm.mode = PlacementMode::group_clustered;
    pm.width = pm.height = 1000;
    pm.radius = 20;
    pm.sigma = 0.0;
    World w = deploy(provision(std::span<const std::size_t>(sizes), 128, 0.0, 1), pm, 1);
    const ClusterOutcome o = run(w, 40);
    const bool ok = o.dominator_set.size() == c.expected && o.coverage_failures.empty() &&
                    ideal_ds_size(c.n, c.eta) == c.expected;
    v.pass = v.pass && ok;
    v.detail += "(" + std::to_string(c.n) + "," + std::to_string(c.eta) + ")->" +
                std::to_string(o.dominator_set.size()) + " ";
  }
  return v;
}

// --- 3: storage ------------------------------------------------------------------

Verdict storage() {
  Verdict v;
  const std::uint64_t gd = gd_storage_bits(10, 128), os = os_storage_bits(128);
  const std::uint64_t total = network_storage_bits(5, 50, 10, 128);
  const KeyMaterial m = provision({10, 10, 10, 10, 10}, 128, 0.0, 3);
  std::uint64_t ring_sum = 0;
  for (const auto& [id, ring] : m.rings)
    for (const Key* k : ring.keys()) ring_sum += k->bits.size() * 8;
  const StorageReport rep = storage_bits(m);
  v.pass = gd == 1408 && os == 256 && total == 19840 && ring_sum == total && rep.total == total;
  v.detail = "gd " + std::to_string(gd) + ", os " + std::to_string(os) + ", total " +
             std::to_string(total) + ", ring sum " + std::to_string(ring_sum);
  return v;
}

// --- 4: cluster-level connectivity degree ----------------------------------------

using Big = boost::multiprecision::cpp_dec_float_50;

double precise_degree(std::uint64_t n, const char* pc) {
  const Big nn(n);
  Big p = (log(nn) - log(-log(Big(pc)))) / nn;
  if (p > 1) p = 1;
  if (p < 0) p = 0;
  return static_cast<double>(p * (nn - 1));
}

Verdict er_degree() {
  Verdict v;
  const double d = expected_gd_degree(100, 0.99);
  const double oracle = precise_degree(100, "0.99");
  const bool value_ok = std::abs(d - 9.113) <= 0.01 && std::abs(d - oracle) <= 1e-9;
  bool gaps_ok = true;
  std::string gaps;
  for (std::uint64_t n : {20, 50, 100, 200}) {
    const double gap = expected_gd_degree(n, 0.999) - expected_gd_degree(n, 0.99);
    gaps_ok = gaps_ok && gap >= 1.8 && gap <= 2.6;
    gaps += (gaps.empty() ? "" : " ") + fmt(gap, 3);
  }
  const double flat = std::abs(expected_gd_degree(200, 0.99) - expected_gd_degree(150, 0.99));
  const bool flat_ok = flat < 0.2;
  v.pass = value_ok && gaps_ok && flat_ok;
  v.detail = "d(100,.99)=" + fmt(d, 6) + " (oracle " + fmt(oracle, 6) + "), gaps " + gaps +
             ", |d200-d150|=" + fmt(flat, 4) + (flat_ok ? "" : " exceeds 0.2");
  return v;
}

// --- 5: dominator count against CDS baselines -----------------------------------

Verdict sweeps() {
  const auto t0 = Clock::now();
  Verdict v;
  std::size_t cds_checked = 0, cds_bad = 0;
  for (auto [degree, n_min] : {std::pair{6.0, 20}, std::pair{12.0, 40}}) {
    CompareConfig cfg;
    cfg.degree = degree;
    cfg.n_min = n_min;
    cfg.n_max = 200;
    cfg.step = 20;
    cfg.eta = 9;
    cfg.seeds = 30;
    const CompareResult res = compare_ds_sizes(cfg);
    if (res.missing > 0) {
      v.pass = false;
      v.detail += "degree " + fmt(degree, 0) + ": " + std::to_string(res.missing) + " missing; ";
    }
    // Rebuild each graph independently and recheck the baselines' sets.
    for (std::uint64_t n = cfg.n_min; n <= cfg.n_max; n += cfg.step) {
      const double radius = radius_for_expected_degree(n, cfg.width, cfg.height, degree);
      for (std::uint64_t s = 0; s < cfg.seeds; ++s) {
        const std::uint64_t point_seed = derive_seed(
            cfg.base_seed, (n << 40) ^ (static_cast<std::uint64_t>(degree * 1000) << 20) ^ s);
        for (std::uint64_t attempt = 0; attempt < cfg.retry_budget; ++attempt) {
          const Graph g = gen_udg(n, cfg.width, cfg.height, radius, derive_seed(point_seed, attempt));
          if (!is_connected(g)) continue;
          for (const VertexSet& set : {cds_alg1(g), cds_alg2(g)}) {
            ++cds_checked;
            if (!is_cds(g, set)) ++cds_bad;
          }
          break;
        }
      }
    }
    const auto ours = mean_by_n(res.rows, "ours");
    const auto a1 = mean_by_n(res.rows, "cds_alg1");
    const auto a2 = mean_by_n(res.rows, "cds_alg2");
    std::string worst;
    for (const auto& [n, m] : ours) {
      if (n < 100) continue;
      const bool ok = m < a1.at(n) && m < a2.at(n);
      if (!ok) {
        v.pass = false;
        worst += " n=" + std::to_string(n) + " ours " + fmt(m, 2) + " alg1 " + fmt(a1.at(n), 2) +
                 " alg2 " + fmt(a2.at(n), 2);
      }
    }
    v.detail += "degree " + fmt(degree, 0) + ": n=200 ours " + fmt(ours.at(200), 2) + " alg1 " +
                fmt(a1.at(200), 2) + " alg2 " + fmt(a2.at(200), 2) + worst + "; ";
  }
  const double secs = seconds_since(t0);
  v.pass = v.pass && cds_bad == 0 && secs < 300.0;
  v.detail += std::to_string(cds_checked) + " baseline sets, " + std::to_string(cds_bad) +
              " not connected-dominating, " + fmt(secs, 1) + " s";
  return v;
}

// --- 6: protocol soundness --------------------------------------------------------

Verdict soundness() {
  Verdict v;
  std::size_t unresolved = 0, not_dominating = 0, wcds_ok = 0, unexplained = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::vector<std::size_t> sizes(10, 9);
    PlacementModel pm;
    pm.mode = PlacementMode::group_clustered;
    pm.width = pm.height = 80;
    pm.radius = 25;
    pm.sigma = 8;
    World w = deploy(provision(std::span<const std::size_t>(sizes), 128, 0.0, seed), pm, seed);
    const ClusterOutcome o = run(w, 60);
    const VerifyReport rep = verify_outcome(w, o);
    for (NodeId id : w.deployed_sensors()) {
      const NodeState& s = w.nodes.at(id);
      if (s.rank == Rank::Os && !s.dominator) ++unresolved;
    }
    unresolved += o.coverage_failures.size();
    if (!rep.is_dominating) ++not_dominating;
    if (rep.is_wcds)
      ++wcds_ok;
    else if (rep.graph_connected)
      ++unexplained;
  }
  v.pass = unresolved == 0 && not_dominating == 0 && wcds_ok >= 95 && unexplained == 0;
  v.detail = std::to_string(unresolved) + " unresolved Os, " + std::to_string(not_dominating) +
             " non-dominating, " + std::to_string(wcds_ok) + "/100 weakly connected, " +
             std::to_string(unexplained) + " failures on connected graphs";
  return v;
}

// --- 7: security -------------------------------------------------------------------

Verdict security() {
  Verdict v;
  std::size_t runs = 0, foreign_members = 0, forged_dominators = 0;
  const AdversaryBehavior behaviors[] = {AdversaryBehavior::forge_join,
                                         AdversaryBehavior::forge_approve,
                                         AdversaryBehavior::replay};
  // 100 runs per behaviour.
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const AdversaryBehavior b = behaviors[seed % 3];
    const std::vector<std::size_t> sizes(6, 6);
    PlacementModel pm;
    pm.mode = PlacementMode::group_clustered;
    pm.width = pm.height = 60;
    pm.radius = 20;
    World w = deploy(provision(std::span<const std::size_t>(sizes), 128, 0.0, seed), pm, seed);
    // Half the forgers sit right next to a real dominator.
    std::vector<Point> near;
    for (const auto& g : w.material.groups)
      near.push_back({w.positions[g.gd].x + 0.5, w.positions[g.gd].y});
    w = inject_adversary_at(std::move(w), near, b);
    w = inject_adversary(std::move(w), 4, b, derive_seed(seed, 7));
    std::set<NodeId> hostile;
    for (const auto& a : w.adversaries) hostile.insert(a.id);
    const ClusterOutcome o = run(w, 40);
    ++runs;
    std::set<NodeId> provisioned;
    for (const auto& [id, ring] : w.material.rings) provisioned.insert(id);
    for (auto [os, gd] : o.membership) {
      if (!provisioned.contains(os) || !provisioned.contains(gd)) ++foreign_members;
      if (hostile.contains(gd)) ++forged_dominators;
    }
    for (NodeId d : o.dominator_set)
      if (!provisioned.contains(d)) ++forged_dominators;
    for (const auto& [id, s] : w.nodes)
      if (s.dominator && hostile.contains(*s.dominator)) ++forged_dominators;
  }

  // One captured ring reads its own traffic and nothing else.
  std::size_t audit_leaks = 0, audited = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::vector<std::size_t> sizes(6, 6);
    PlacementModel pm;
    pm.width = pm.height = 70;
    pm.radius = 20;
    World w = deploy(provision(std::span<const std::size_t>(sizes), 128, 0.0, seed), pm, seed);
    run(w, 40);
    std::vector<Ciphertext> log;
    for (const auto& e : w.sent_log) log.push_back(e.ciphertext);
    for (const auto& [id, s] : w.nodes) {
      if (s.rank != Rank::Os || !s.dominator) continue;
      ++audited;
      std::set<KeyId> own;
      for (const Key* k : s.ring.keys()) own.insert(k->id);
      for (std::size_t i : decryptable_by(s.ring, log))
        if (!own.contains(log[i].key_id)) ++audit_leaks;
    }
  }

  // A departed member cannot read anything sent after it leaves.
  std::size_t post_leave_reads = 0, post_leave_msgs = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::vector<std::size_t> sizes(4, 6);
    PlacementModel pm;
    pm.width = pm.height = 50;
    pm.radius = 20;
    pm.sigma = 3;
    World w = deploy(provision(std::span<const std::size_t>(sizes), 128, 0.0, seed), pm, seed);
    run(w, 40);
    NodeId leaver = 0;
    bool found = false;
    for (const auto& [id, s] : w.nodes)
      if (s.rank == Rank::Os && s.dominator && !found) {
        leaver = id;
        found = true;
      }
    if (!found) continue;
    const KeyRing ring = w.nodes.at(leaver).ring;
    const NodeId gd = *w.nodes.at(leaver).dominator;
    const std::size_t before = w.sent_log.size();
    leave(w, leaver);
    for (std::size_t i = before; i < w.sent_log.size(); ++i) {
      if (w.sent_log[i].sender == leaver) continue;
      ++post_leave_msgs;
      for (const Key* k : ring.keys())
        if (decrypt(*k, w.sent_log[i].ciphertext).ok()) ++post_leave_reads;
    }
    const Key& current = *w.nodes.at(gd).ring.group_key;
    const Bytes body{1, 2, 3};
    const Ciphertext later = encrypt(current, MessageKind::REKEY, body);
    for (const Key* k : ring.keys())
      if (decrypt(*k, later).ok()) ++post_leave_reads;
    ++post_leave_msgs;
  }

  v.pass = foreign_members == 0 && forged_dominators == 0 && audit_leaks == 0 && audited > 0 &&
           post_leave_reads == 0 && post_leave_msgs > 0;
  v.detail = std::to_string(runs) + " hostile runs: " + std::to_string(foreign_members) +
             " unprovisioned members, " + std::to_string(forged_dominators) +
             " forged dominators; audit " + std::to_string(audited) + " rings, " +
             std::to_string(audit_leaks) + " leaks; post-leave " +
             std::to_string(post_leave_reads) + "/" + std::to_string(post_leave_msgs) + " readable";
  return v;
}

// --- 8: determinism --------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism() {
  Verdict v;
  const fs::path dir = fs::temp_directory_path() / ("wcds_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string cli = std::string("'") + WCDS_CLI_PATH + "'";
  const std::string config = std::string(WCDS_SOURCE_DIR) + "/configs/adversarial.json";
  std::string outputs[2][3];
  for (int i = 0; i < 2; ++i) {
    const fs::path o = dir / ("o" + std::to_string(i) + ".json");
    const fs::path t = dir / ("t" + std::to_string(i) + ".jsonl");
    const fs::path c = dir / ("c" + std::to_string(i) + ".csv");
    const int a = shell(cli + " sim --config '" + config + "' --out '" + o.string() + "' --trace '" +
                        t.string() + "'");
    const int b = shell(cli + " compare --nmin 20 --nmax 100 --step 40 --degree 6 --seeds 5 --seed 3" +
                        " --out '" + c.string() + "'");
    if (a != 0 || b != 0) v.pass = false;
    outputs[i][0] = slurp(o);
    outputs[i][1] = slurp(t);
    outputs[i][2] = slurp(c);
  }
  std::size_t bytes = 0;
  for (int k = 0; k < 3; ++k) {
    bytes += outputs[0][k].size();
    if (outputs[0][k].empty() || outputs[0][k] != outputs[1][k]) v.pass = false;
  }
  fs::remove_all(dir);
  v.detail = "sim outcome, sim trace and compare CSV compared (" + std::to_string(bytes) +
             " bytes per run)";
  return v;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Verdict()>> criteria[] = {
      {"min WCDS <= min CDS", weak_vs_strict},
      {"ideal dominator counts", ideal_counts},
      {"key storage", storage},
      {"cluster-level degree", er_degree},
      {"dominators vs CDS baselines", sweeps},
      {"protocol soundness", soundness},
      {"adversaries and rekeying", security},
      {"CLI determinism", determinism},
  };
  int failed = 0, index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << index << " (" << name
              << "): " << v.detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criterion(s) failed" : "all criteria passed")
            << std::endl;
  return failed ? 1 : 0;
}
