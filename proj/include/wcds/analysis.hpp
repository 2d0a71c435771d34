#pragma once

// Closed-form curves and the dominating-set size comparison sweep.
//
// Every emitter produces CurvePoints which serialize to one CSV schema:
//
//   experiment,n,degree,eta,seed,method,value
//
// Columns that do not apply to a row are left empty. Doubles are written in
// shortest round-trip form, so reading a file back yields identical points.

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "wcds/cds_baselines.hpp"
#include "wcds/deployment.hpp"
#include "wcds/error.hpp"
#include "wcds/format.hpp"
#include "wcds/graph.hpp"
#include "wcds/key_scheme.hpp"

namespace wcds {

/// Dominator count when every group sits inside its dominator's disk.
inline std::uint64_t ideal_ds_size(std::uint64_t n, std::uint64_t eta) {
  return (n + eta) / (eta + 1);
}

/// Edge probability at which G(n, p) is connected with probability pc in the
/// limit: p = (ln n - ln(-ln pc)) / n, clamped to [0, 1].
inline double er_threshold_p(std::uint64_t n, double pc) {
  if (n < 2) throw InvalidArgument("er_threshold_p: need n >= 2");
  if (!(pc > 0.0 && pc < 1.0)) throw InvalidArgument("er_threshold_p: pc must lie in (0, 1)");
  const double p = (std::log(static_cast<double>(n)) - std::log(-std::log(pc))) /
                   static_cast<double>(n);
  return std::clamp(p, 0.0, 1.0);
}

/// Expected dominator degree in the cluster-level random graph: p * (n - 1).
inline double expected_gd_degree(std::uint64_t n, double pc) {
  return er_threshold_p(n, pc) * static_cast<double>(n - 1);
}

struct CurvePoint {
  std::string experiment;
  std::optional<std::int64_t> n;
  std::optional<double> degree;
  std::optional<std::int64_t> eta;
  std::optional<std::uint64_t> seed;
  std::string method;
  double value = 0.0;
  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

inline std::vector<CurvePoint> distinct_key_curve(const std::vector<std::uint64_t>& sizes,
                                                  std::uint64_t eta) {
  std::vector<CurvePoint> out;
  for (std::uint64_t n : sizes) {
    const std::uint64_t alpha = ideal_ds_size(n, eta);
    const std::uint64_t beta = n - alpha;
    out.push_back({"fig9_distinct_keys", static_cast<std::int64_t>(n), std::nullopt,
                   static_cast<std::int64_t>(eta), std::nullopt, "keys",
                   static_cast<double>(alpha + beta)});
  }
  return out;
}

inline std::vector<CurvePoint> gd_storage_curve(const std::vector<std::uint64_t>& etas,
                                                const std::vector<std::uint64_t>& key_bits) {
  std::vector<CurvePoint> out;
  for (std::uint64_t k : key_bits) {
    if (!valid_key_bits(k)) throw InvalidArgument("gd_storage_curve: invalid key length");
    for (std::uint64_t eta : etas)
      out.push_back({"fig10_gd_storage_k" + std::to_string(k), std::nullopt, std::nullopt,
                     static_cast<std::int64_t>(eta), std::nullopt, "gd_bits",
                     static_cast<double>(gd_storage_bits(eta, k))});
  }
  return out;
}

inline std::vector<CurvePoint> er_degree_curve(const std::vector<std::uint64_t>& sizes,
                                               const std::vector<double>& pcs) {
  std::vector<CurvePoint> out;
  for (double pc : pcs)
    for (std::uint64_t n : sizes)
      out.push_back({"fig12_pc" + format_double(pc), static_cast<std::int64_t>(n), std::nullopt,
                     std::nullopt, std::nullopt, "er_degree", expected_gd_degree(n, pc)});
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kCsvHeader = "experiment,n,degree,eta,seed,method,value";

inline void write_csv(std::ostream& os, const std::vector<CurvePoint>& points) {
  os << kCsvHeader << '\n';
  for (const auto& p : points) {
    os << p.experiment << ',';
    if (p.n) os << *p.n;
    os << ',';
    if (p.degree) os << format_double(*p.degree);
    os << ',';
    if (p.eta) os << *p.eta;
    os << ',';
    if (p.seed) os << *p.seed;
    os << ',' << p.method << ',' << format_double(p.value) << '\n';
  }
}

inline std::vector<CurvePoint> read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw ParseError("csv: missing or bad header");
  std::vector<CurvePoint> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (f.size() != 7) throw ParseError("csv: expected 7 fields in '" + line + "'");
    CurvePoint p;
    p.experiment = f[0];
    if (!f[1].empty()) p.n = parse_integer<std::int64_t>(f[1]);
    if (!f[2].empty()) p.degree = parse_double(f[2]);
    if (!f[3].empty()) p.eta = parse_integer<std::int64_t>(f[3]);
    if (!f[4].empty()) p.seed = parse_integer<std::uint64_t>(f[4]);
    p.method = f[5];
    p.value = parse_double(f[6]);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dominating-set size comparison

struct CompareConfig {
  std::uint64_t n_min = 20;
  std::uint64_t n_max = 200;
  std::uint64_t step = 20;
  double degree = 6.0;
  std::uint64_t eta = 9;
  std::uint64_t seeds = 30;
  std::uint64_t base_seed = 1;
  double width = 100.0;
  double height = 100.0;
  std::uint64_t retry_budget = 200;
  std::uint64_t max_rounds = 60;
};

struct CompareResult {
  std::vector<CurvePoint> rows;
  std::uint64_t retries = 0;   // disconnected graphs regenerated
  std::uint64_t missing = 0;   // points given up after the retry budget
  std::uint64_t unresolved = 0;  // orphans our scheme left uncovered
};

/// Our dominator count for one deployment: dominators including promotions,
/// plus any orphan the protocol could not resolve (each would have to become
/// its own dominator).
inline std::uint64_t our_ds_size(std::uint64_t n, const CompareConfig& cfg, double radius,
                                 std::uint64_t seed, std::uint64_t* unresolved = nullptr) {
  const auto sizes = group_sizes_for(n, cfg.eta);
  KeyMaterial m = provision(std::span<const std::size_t>(sizes), 128, 0.0, seed);
  PlacementModel pm;
  pm.mode = PlacementMode::group_clustered;
  pm.width = cfg.width;
  pm.height = cfg.height;
  pm.radius = radius;
  World w = deploy(std::move(m), pm, seed);
  const ClusterOutcome o = run(w, cfg.max_rounds);
  if (unresolved) *unresolved += o.coverage_failures.size();
  return o.dominator_set.size() + o.coverage_failures.size();
}

inline CompareResult compare_ds_sizes(const CompareConfig& cfg) {
  if (cfg.step == 0 || cfg.n_min < 2 || cfg.n_max < cfg.n_min)
    throw InvalidArgument("compare_ds_sizes: bad n range");
  CompareResult res;
  const std::string experiment = "fig11_degree" + format_double(cfg.degree);
  for (std::uint64_t n = cfg.n_min; n <= cfg.n_max; n += cfg.step) {
    const double radius = radius_for_expected_degree(n, cfg.width, cfg.height, cfg.degree);
    const auto n_col = static_cast<std::int64_t>(n);
    const auto eta_col = static_cast<std::int64_t>(cfg.eta);
    for (std::uint64_t s = 0; s < cfg.seeds; ++s) {
      const std::uint64_t point_seed =
          derive_seed(cfg.base_seed, (n << 40) ^ (static_cast<std::uint64_t>(cfg.degree * 1000) << 20) ^ s);
      std::optional<Graph> g;
      for (std::uint64_t attempt = 0; attempt < cfg.retry_budget; ++attempt) {
        Graph cand = gen_udg(n, cfg.width, cfg.height, radius, derive_seed(point_seed, attempt));
        if (is_connected(cand)) {
          g = std::move(cand);
          break;
        }
        ++res.retries;
      }
      if (!g) {
        ++res.missing;
        continue;
      }
      const auto a1 = cds_alg1(*g).size();
      const auto a2 = cds_alg2(*g).size();
      const auto ours = our_ds_size(n, cfg, radius, point_seed, &res.unresolved);
      res.rows.push_back({experiment, n_col, cfg.degree, eta_col, s, "ours", double(ours)});
      res.rows.push_back({experiment, n_col, cfg.degree, eta_col, s, "cds_alg1", double(a1)});
      res.rows.push_back({experiment, n_col, cfg.degree, eta_col, s, "cds_alg2", double(a2)});
    }
    res.rows.push_back({experiment, n_col, cfg.degree, eta_col, std::nullopt, "ideal_eq2",
                        double(ideal_ds_size(n, cfg.eta))});
  }
  return res;
}

/// Mean value per n for one method (rows without a seed are ignored).
inline std::map<std::int64_t, double> mean_by_n(const std::vector<CurvePoint>& rows,
                                                const std::string& method) {
  std::map<std::int64_t, std::pair<double, std::size_t>> acc;
  for (const auto& r : rows) {
    if (r.method != method || !r.n || !r.seed) continue;
    auto& [sum, count] = acc[*r.n];
    sum += r.value;
    ++count;
  }
  std::map<std::int64_t, double> out;
  for (const auto& [n, sc] : acc) out[n] = sc.first / static_cast<double>(sc.second);
  return out;
}

}  // namespace wcds
