#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "wcds/analysis.hpp"
#include "wcds/io.hpp"

using namespace wcds;
namespace fs = std::filesystem;

namespace {

const char* kCli = WCDS_CLI_PATH;

fs::path scratch() {
  const fs::path dir = fs::path(::testing::TempDir()) / "wcds_io" /
                       ::testing::UnitTest::GetInstance()->current_test_info()->name();
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Result {
  int code = -1;
  std::string out, err;
};

/// Runs the CLI with `args` (already shell-quoted where needed).
Result cli(const std::string& args, const std::string& env = "") {
  const fs::path dir = scratch();
  const fs::path out = dir / "stdout", err = dir / "stderr";
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" + kCli + "' " + args + " >'" +
                          out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

json ideal_config() {
  return json::parse(R"({
    "groups": 3, "eta": 5,
    "placement": {"mode": "group_clustered", "sigma": 1.0, "width": 100, "height": 100, "radius": 15},
    "seed": 7, "max_rounds": 30})");
}

}  // namespace

// --- Library-level formats -----------------------------------------------------

TEST(RunConfig, ParsesAndRoundTrips) {
  json j = ideal_config();
  j["adversaries"] = json::array({{{"count", 2}, {"behavior", "replay"}}});
  j["tau"] = 2;
  const RunConfig c = parse_run_config(j);
  EXPECT_EQ(c.groups, 3u);
  EXPECT_EQ(c.eta, 5u);
  EXPECT_EQ(c.sigma, std::optional<double>(1.0));
  EXPECT_EQ(c.radius, std::optional<double>(15.0));
  EXPECT_EQ(c.tau, 2u);
  ASSERT_EQ(c.adversaries.size(), 1u);
  EXPECT_EQ(c.adversaries[0].behavior, AdversaryBehavior::replay);
  const RunConfig again = parse_run_config(run_config_to_json(c));
  EXPECT_EQ(run_config_to_json(again), run_config_to_json(c));
}

TEST(RunConfig, TargetDegreeDerivesRadius) {
  json j = ideal_config();
  j["placement"].erase("radius");
  j["placement"]["target_degree"] = 6;
  const RunConfig c = parse_run_config(j);
  EXPECT_DOUBLE_EQ(c.placement().radius, radius_for_expected_degree(18, 100, 100, 6));
}

TEST(RunConfig, AdversaryShorthands) {
  json j = ideal_config();
  j["adversaries"] = 3;
  EXPECT_EQ(parse_run_config(j).adversaries[0].count, 3u);
  j["adversaries"] = {{"count", 1}, {"behavior", "forge_approve"}};
  EXPECT_EQ(parse_run_config(j).adversaries[0].behavior, AdversaryBehavior::forge_approve);
}

TEST(RunConfig, Rejections) {
  json both = ideal_config();
  both["placement"]["target_degree"] = 6;
  EXPECT_THROW(parse_run_config(both), ParseError);
  json neither = ideal_config();
  neither["placement"].erase("radius");
  EXPECT_THROW(parse_run_config(neither), ParseError);
  json mode = ideal_config();
  mode["placement"]["mode"] = "spiral";
  EXPECT_THROW(parse_run_config(mode), ParseError);
  json behavior = ideal_config();
  behavior["adversaries"] = {{"count", 1}, {"behavior", "jam"}};
  EXPECT_THROW(parse_run_config(behavior), ParseError);
  json missing = ideal_config();
  missing.erase("groups");
  EXPECT_THROW(parse_run_config(missing), ParseError);
}

TEST(Outcome, JsonShape) {
  const RunConfig c = parse_run_config(ideal_config());
  World w = build_world(c);
  const ClusterOutcome o = run(w, c.max_rounds);
  const json j = outcome_to_json(o, verify_outcome(w, o));
  EXPECT_EQ(j.at("dominator_count"), 3);
  EXPECT_EQ(j.at("dominator_set"), json::array({0, 6, 12}));
  EXPECT_EQ(j.at("membership").size(), 15u);
  EXPECT_EQ(j.at("membership")[0], json::array({1, 0}));
  EXPECT_EQ(j.at("message_count").at("JOIN_REQ"), 15);
  EXPECT_TRUE(j.at("verify").at("is_dominating").get<bool>());
  EXPECT_TRUE(j.at("orphan_log").empty());
}

TEST(Material, ExportsIdsButNoKeyBytes) {
  const KeyMaterial m = provision({2, 1}, 128, 0.5, 4);
  const json j = material_to_json(m);
  EXPECT_EQ(j.at("key_bits"), 128);
  EXPECT_EQ(j.at("groups").size(), 2u);
  EXPECT_EQ(j.at("groups")[0].at("members"), json::array({1, 2}));
  EXPECT_EQ(j.at("reserve"), json::array({2}));
  const std::string text = j.dump();
  EXPECT_EQ(text.find("bits\":["), std::string::npos);
}

TEST(Events, JsonLinesRoundTrip) {
  const RunConfig c = parse_run_config(ideal_config());
  World w = build_world(c);
  run(w, c.max_rounds);
  ASSERT_FALSE(w.events.empty());
  std::stringstream ss;
  write_events_jsonl(ss, w.events);
  const auto back = read_events_jsonl(ss);
  ASSERT_EQ(back.size(), w.events.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].round, w.events[i].round);
    EXPECT_EQ(back[i].node, w.events[i].node);
    EXPECT_EQ(back[i].event, w.events[i].event);
    EXPECT_EQ(back[i].detail, w.events[i].detail);
  }
  std::stringstream bad("{\"round\": 1}\n");
  EXPECT_THROW(read_events_jsonl(bad), ParseError);
}

// --- Command line ------------------------------------------------------------

TEST(Cli, StoragePrintsClosedForms) {
  const Result r = cli("storage --alpha 5 --beta 50 --eta 10 --k 128");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "gamma_gd 1408 bits\ngamma_os 256 bits\ntotal 19840 bits\n");
}

TEST(Cli, UsageErrorsExitOne) {
  for (const char* args : {"storage --alpha 5 --beta 50 --eta 10 --bogus 1", "", "frobnicate",
                           "storage --alpha x --beta 1 --eta 1", "sim"}) {
    const Result r = cli(args);
    EXPECT_EQ(r.code, 1) << args;
    EXPECT_FALSE(r.err.empty()) << args;
  }
}

TEST(Cli, RuntimeFailuresExitTwo) {
  EXPECT_EQ(cli("sim --config /nonexistent/run.json").code, 2);
  EXPECT_EQ(cli("storage --alpha 1 --beta 1 --eta 1 --k 100").code, 2);
  const Result r = cli("compare --nmin 20 --nmax 20 --step 20 --degree 0.5 --seeds 2 --retries 2");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("retry budget"), std::string::npos);
  std::stringstream csv(r.out);
  EXPECT_EQ(read_csv(csv).size(), 1u);  // ideal row only, nothing fabricated
}

TEST(Cli, GenWritesReadableEdgeList) {
  const fs::path out = scratch() / "g.txt";
  EXPECT_EQ(cli("gen --n 40 --degree 6 --seed 5 --out '" + out.string() + "'").code, 0);
  std::ifstream f(out);
  const Graph g = read_edge_list(f);
  const Graph expected =
      gen_udg(40, 100, 100, radius_for_expected_degree(40, 100, 100, 6), 5);
  EXPECT_EQ(g, expected);
}

TEST(Cli, SeedFallsBackToEnvironment) {
  const Result flag = cli("gen --n 20 --radius 20 --seed 9");
  const Result env = cli("gen --n 20 --radius 20", "WCDS_SEED=9");
  const Result other = cli("gen --n 20 --radius 20", "WCDS_SEED=10");
  EXPECT_EQ(flag.code, 0);
  EXPECT_EQ(flag.out, env.out);
  EXPECT_NE(flag.out, other.out);
  EXPECT_EQ(cli("gen --n 20 --radius 20", "WCDS_SEED=abc").code, 2);
}

TEST(Cli, SimOnIdealConfig) {
  const fs::path dir = scratch();
  {
    std::ofstream(dir / "ideal.json") << ideal_config().dump();
  }
  const Result r = cli("sim --config '" + (dir / "ideal.json").string() + "' --out '" +
                       (dir / "o.json").string() + "' --trace '" + (dir / "t.jsonl").string() +
                       "' --material '" + (dir / "m.json").string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  const json o = json::parse(slurp(dir / "o.json"));
  EXPECT_EQ(o.at("dominator_count"), 3);
  EXPECT_EQ(o.at("config").at("seed"), 7);
  std::ifstream trace(dir / "t.jsonl");
  EXPECT_FALSE(read_events_jsonl(trace).empty());
  EXPECT_EQ(json::parse(slurp(dir / "m.json")).at("groups").size(), 3u);

  const Result pretty = cli("trace --in '" + (dir / "t.jsonl").string() + "'");
  EXPECT_EQ(pretty.code, 0);
  EXPECT_NE(pretty.out.find("-- round 0"), std::string::npos);
  EXPECT_NE(pretty.out.find("join_req"), std::string::npos);
}

TEST(Cli, SimSeedOverride) {
  const fs::path dir = scratch();
  json cfg = ideal_config();
  cfg.erase("seed");
  {
    std::ofstream(dir / "c.json") << cfg.dump();
  }
  const std::string base = "sim --config '" + (dir / "c.json").string() + "'";
  const Result env = cli(base, "WCDS_SEED=4");
  const Result flag = cli(base + " --seed 4");
  ASSERT_EQ(env.code, 0);
  EXPECT_EQ(json::parse(env.out).at("config").at("seed"), 4);
  EXPECT_EQ(env.out, flag.out);
}

TEST(Cli, CompareRowCount) {
  const Result r = cli("compare --nmin 20 --nmax 60 --step 20 --degree 6 --eta 9 --seeds 2");
  ASSERT_EQ(r.code, 0) << r.err;
  std::stringstream csv(r.out);
  const auto rows = read_csv(csv);
  EXPECT_EQ(rows.size(), 3u * 3 * 2 + 3);
  EXPECT_EQ(r.out.rfind(kCsvHeader, 0), 0u);
}

TEST(Cli, CurvesOneFilePerExperiment) {
  const fs::path dir = scratch() / "curves";
  ASSERT_EQ(cli("curves --out-dir '" + dir.string() + "'").code, 0);
  std::set<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    names.insert(entry.path().filename().string());
    std::ifstream f(entry.path());
    const auto pts = read_csv(f);
    ASSERT_FALSE(pts.empty());
    for (const auto& p : pts) EXPECT_EQ(p.experiment + ".csv", entry.path().filename().string());
  }
  EXPECT_EQ(names, (std::set<std::string>{
                       "fig9_distinct_keys.csv", "fig10_gd_storage_k64.csv",
                       "fig10_gd_storage_k128.csv", "fig10_gd_storage_k256.csv",
                       "fig12_pc0.9.csv", "fig12_pc0.99.csv", "fig12_pc0.999.csv",
                       "fig12_pc0.9999.csv"}));
  const std::string text = slurp(dir / "fig10_gd_storage_k128.csv");
  EXPECT_NE(text.find(",10,,gd_bits,1408\n"), std::string::npos);
}
