// wcds: command-line front end.
//
//   wcds gen      --n 100 --width 100 --height 100 --degree 6 --seed 1 [--out g.txt]
//   wcds sim      --config run.json [--out outcome.json] [--trace events.jsonl]
//   wcds compare  --nmin 20 --nmax 200 --step 20 --degree 6 --eta 9 --seeds 30 [--out fig11.csv]
//   wcds curves   --out-dir DIR
//   wcds storage  --alpha 5 --beta 50 --eta 10 --k 128
//   wcds trace    --in events.jsonl
//
// Exit status: 0 success, 1 usage error, 2 runtime failure.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "wcds/wcds.hpp"

namespace {

using namespace wcds;

struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("WCDS_SEED");
  if (!s || !*s) return std::nullopt;
  try {
    return parse_integer<std::uint64_t>(s);
  } catch (const ParseError&) {
    throw RuntimeFailure("WCDS_SEED is not an unsigned integer");
  }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback = 0) {
  if (flag) return *flag;
  return env_seed().value_or(fallback);
}

/// Writes to `path`, or to stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw RuntimeFailure("cannot write " + path);
  f << text;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw RuntimeFailure("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// --- gen -------------------------------------------------------------------

struct GenOpts {
  std::size_t n = 100;
  double width = 100.0, height = 100.0;
  std::optional<double> radius, degree;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_gen(const GenOpts& o) {
  double r = 0.0;
  if (o.radius)
    r = *o.radius;
  else if (o.degree)
    r = radius_for_expected_degree(o.n, o.width, o.height, *o.degree);
  else
    throw RuntimeFailure("gen: one of --radius or --degree is required");
  const Graph g = gen_udg(o.n, o.width, o.height, r, resolve_seed(o.seed));
  std::ostringstream ss;
  write_edge_list(ss, g);
  emit(o.out, ss.str());
  return 0;
}

// --- sim -------------------------------------------------------------------

struct SimOpts {
  std::string config, out, trace, material;
  std::optional<std::uint64_t> seed;
};

int cmd_sim(const SimOpts& o) {
  json doc;
  try {
    doc = json::parse(slurp(o.config));
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!doc.contains("seed")) doc["seed"] = resolve_seed(std::nullopt);
  if (o.seed) doc["seed"] = *o.seed;
  const RunConfig cfg = parse_run_config(doc);
  World w = build_world(cfg);
  if (!o.material.empty()) emit(o.material, material_to_json(w.material).dump(2) + "\n");
  const ClusterOutcome outcome = run(w, cfg.max_rounds);
  json result = outcome_to_json(outcome, verify_outcome(w, outcome));
  result["config"] = run_config_to_json(cfg);
  emit(o.out, result.dump(2) + "\n");
  if (!o.trace.empty()) {
    std::ostringstream ss;
    write_events_jsonl(ss, w.events);
    emit(o.trace, ss.str());
  }
  return 0;
}

// --- compare ---------------------------------------------------------------

struct CompareOpts {
  CompareConfig cfg;
  std::optional<std::uint64_t> seed;
  std::string out;
};

int cmd_compare(CompareOpts o) {
  o.cfg.base_seed = resolve_seed(o.seed, o.cfg.base_seed);
  const CompareResult res = compare_ds_sizes(o.cfg);
  std::ostringstream ss;
  write_csv(ss, res.rows);
  emit(o.out, ss.str());
  if (res.missing > 0) {
    std::cerr << "compare: " << res.missing
              << " point(s) missing after exhausting the disconnected-graph retry budget\n";
    return 2;
  }
  return 0;
}

// --- curves ----------------------------------------------------------------

struct CurvesOpts {
  std::string out_dir = ".";
  std::uint64_t eta = 9;
  std::uint64_t nmin = 20, nmax = 200, step = 10;
  std::optional<std::uint64_t> seed;  // accepted for uniformity; the curves are closed-form
};

int cmd_curves(const CurvesOpts& o) {
  if (o.step == 0 || o.nmax < o.nmin) throw RuntimeFailure("curves: bad n range");
  std::vector<std::uint64_t> sizes;
  for (std::uint64_t n = o.nmin; n <= o.nmax; n += o.step) sizes.push_back(n);
  std::vector<std::uint64_t> er_sizes;
  for (std::uint64_t n : sizes)
    if (n >= 2) er_sizes.push_back(n);
  std::vector<std::uint64_t> etas;
  for (std::uint64_t e = 0; e <= 50; e += 5) etas.push_back(e);

  std::vector<CurvePoint> all = distinct_key_curve(sizes, o.eta);
  for (auto& p : gd_storage_curve(etas, {64, 128, 256})) all.push_back(std::move(p));
  for (auto& p : er_degree_curve(er_sizes, {0.9, 0.99, 0.999, 0.9999})) all.push_back(std::move(p));

  // One file per experiment, in first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<CurvePoint>> by_experiment;
  for (auto& p : all) {
    auto& bucket = by_experiment[p.experiment];
    if (bucket.empty()) order.push_back(p.experiment);
    bucket.push_back(std::move(p));
  }
  std::filesystem::create_directories(o.out_dir);
  const std::filesystem::path dir(o.out_dir);
  for (const auto& name : order) {
    std::ostringstream ss;
    write_csv(ss, by_experiment[name]);
    emit((dir / (name + ".csv")).string(), ss.str());
  }
  return 0;
}

// --- storage ---------------------------------------------------------------

struct StorageOpts {
  std::uint64_t alpha = 0, beta = 0, eta = 0, k = 128;
  std::optional<std::uint64_t> seed;
};

int cmd_storage(const StorageOpts& o) {
  if (!valid_key_bits(o.k)) throw RuntimeFailure("storage: --k must be 64, 128 or 256");
  std::cout << "gamma_gd " << gd_storage_bits(o.eta, o.k) << " bits\n"
            << "gamma_os " << os_storage_bits(o.k) << " bits\n"
            << "total " << network_storage_bits(o.alpha, o.beta, o.eta, o.k) << " bits\n";
  return 0;
}

// --- trace -----------------------------------------------------------------

struct TraceOpts {
  std::string in;
  std::optional<std::uint64_t> seed;
};

int cmd_trace(const TraceOpts& o) {
  std::istringstream ss(slurp(o.in));
  const auto events = read_events_jsonl(ss);
  std::uint64_t last_round = UINT64_MAX;
  for (const auto& e : events) {
    if (e.round != last_round) {
      std::cout << "-- round " << e.round << '\n';
      last_round = e.round;
    }
    std::cout << "  node " << std::setw(5) << e.node << "  " << std::left << std::setw(20)
              << e.event << std::right << e.detail << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Secure WCDS clustering simulator"};
  app.require_subcommand(1);

  GenOpts gen;
  auto* g = app.add_subcommand("gen", "Generate a random unit-disk graph (edge-list text)");
  g->add_option("--n", gen.n, "Node count");
  g->add_option("--width", gen.width, "Area width");
  g->add_option("--height", gen.height, "Area height");
  auto* gr = g->add_option("--radius", gen.radius, "Transmission radius");
  g->add_option("--degree", gen.degree, "Target mean degree (derives the radius)")->excludes(gr);
  g->add_option("--seed", gen.seed, "Seed (default: $WCDS_SEED or 0)");
  g->add_option("--out", gen.out, "Output file (default stdout)");

  SimOpts sim;
  auto* s = app.add_subcommand("sim", "Run one deployment from a JSON run config");
  s->add_option("--config", sim.config, "Run config JSON")->required();
  s->add_option("--out", sim.out, "Outcome JSON (default stdout)");
  s->add_option("--trace", sim.trace, "Event trace, JSON lines");
  s->add_option("--material", sim.material, "Key-material audit JSON");
  s->add_option("--seed", sim.seed, "Override the config seed");

  CompareOpts cmp;
  auto* c = app.add_subcommand("compare", "Dominating-set size sweep against CDS baselines (CSV)");
  c->add_option("--nmin", cmp.cfg.n_min);
  c->add_option("--nmax", cmp.cfg.n_max);
  c->add_option("--step", cmp.cfg.step);
  c->add_option("--degree", cmp.cfg.degree, "Target mean degree");
  c->add_option("--eta", cmp.cfg.eta, "Ordinary sensors per group");
  c->add_option("--seeds", cmp.cfg.seeds, "Seeds per point");
  c->add_option("--width", cmp.cfg.width);
  c->add_option("--height", cmp.cfg.height);
  c->add_option("--retries", cmp.cfg.retry_budget, "Disconnected-graph retry budget per point");
  c->add_option("--seed", cmp.seed, "Base seed (default: $WCDS_SEED or 1)");
  c->add_option("--out", cmp.out, "Output CSV (default stdout)");

  CurvesOpts cur;
  auto* cu = app.add_subcommand("curves", "Emit distinct-key, GD-storage and connectivity curves");
  cu->add_option("--out-dir", cur.out_dir, "Directory for the CSV files");
  cu->add_option("--eta", cur.eta);
  cu->add_option("--nmin", cur.nmin);
  cu->add_option("--nmax", cur.nmax);
  cu->add_option("--step", cur.step);
  cu->add_option("--seed", cur.seed);

  StorageOpts st;
  auto* sg = app.add_subcommand("storage", "Key storage per GD, per Os and network-wide");
  sg->add_option("--alpha", st.alpha, "Number of GDs")->required();
  sg->add_option("--beta", st.beta, "Number of Oss")->required();
  sg->add_option("--eta", st.eta, "Oss per group")->required();
  sg->add_option("--k", st.k, "Key length in bits");
  sg->add_option("--seed", st.seed);

  TraceOpts tr;
  auto* t = app.add_subcommand("trace", "Pretty-print a JSON-lines event trace");
  t->add_option("--in", tr.in, "Event trace file")->required();
  t->add_option("--seed", tr.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*g) return cmd_gen(gen);
    if (*s) return cmd_sim(sim);
    if (*c) return cmd_compare(cmp);
    if (*cu) return cmd_curves(cur);
    if (*sg) return cmd_storage(st);
    if (*t) return cmd_trace(tr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
