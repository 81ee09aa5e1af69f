#include <clocale>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "catch_amalgamated.hpp"
#include "zigdrain/experiments.hpp"

using namespace zigdrain;
namespace fs = std::filesystem;

namespace {

const std::string kRoot = ZIGDRAIN_SOURCE_DIR;

Scenario shipped(const std::string& name) { return parse_scenario(kRoot + "/scenarios/" + name + ".yaml"); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("zigdrain_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("csv numbers round-trip and ignore the locale", "[csv]") {
  CHECK(csv_number(0.5) == "0.5");
  CHECK(csv_number(-3) == "-3");
  CHECK(csv_number(1e-9) == "1e-09");
  CHECK(std::stod(csv_number(0.1 + 0.2)) == 0.1 + 0.2);
  CHECK(csv_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
  std::setlocale(LC_NUMERIC, "de_DE.UTF-8");
  CHECK(csv_number(2.25) == "2.25");
  std::setlocale(LC_NUMERIC, "C");
}

TEST_CASE("experiment kinds round-trip", "[kinds]") {
  CHECK(all_experiment_kinds().size() == 8);
  for (auto k : all_experiment_kinds()) CHECK(experiment_kind_from(to_string(k)) == k);
  CHECK_THROWS_AS(experiment_kind_from("plot"), Error);
}

TEST_CASE("identical runs compare to zero variation", "[compare]") {
  std::vector<NodeMetrics> a{{1, 1.0, 10.0}, {2, 0.5, 9.0}, {3, 0.0, 8.0}};
  for (const auto& v : compare_metrics(a, a)) {
    CHECK(v.delta_s_pct == 0.0);
    CHECK(v.delta_drain_pct == 0.0);
  }
  auto b = a;
  b[0].throughput = 0.5;
  CHECK(compare_metrics(a, b)[0].delta_s_pct == -50.0);
  b.pop_back();
  CHECK_THROWS_AS(compare_metrics(a, b), MismatchedScenarios);
  b = a;
  b[2].node = 9;
  CHECK_THROWS_AS(compare_metrics(a, b), MismatchedScenarios);
}

TEST_CASE("nodes.csv round-trips", "[csv]") {
  const fs::path dir = scratch("nodes");
  fs::create_directories(dir);
  const std::vector<NodeMetrics> rows{{1, 0.975, 11.25, 130, 127, 3, 4, 0}, {2, 0.1, 3.0, 10, 1, 9, 0, 0}};
  write_nodes_csv(dir / "nodes.csv", rows);
  const auto back = read_nodes_csv(dir / "nodes.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].throughput == 0.975);
  CHECK(back[0].drain_ma == 11.25);
  CHECK(back[1].dropped == 9);
  const auto v = compare_runs(dir, dir);
  CHECK(v.size() == 2);
}

TEST_CASE("per-packet cost structure", "[cost]") {
  const auto rows = per_packet_cost(shipped("sec6_victim"), 1);
  auto at = [&](int level, std::size_t len) {
    for (const auto& r : rows)
      if (r.level == level && r.payload == len) return r;
    FAIL("missing row");
    return CostRow{};
  };
  for (std::size_t len = 10; len <= 100; len += 10) {
    CHECK(at(4, len).t_dec_measured < at(1, len).t_dec_measured);
    CHECK(at(1, len).t_dec_measured < at(5, len).t_dec_measured);
    CHECK(at(5, len).t_dec_measured == Catch::Approx(at(5, len).t_dec_model).epsilon(1e-6));
  }
  CHECK(at(5, 20).t_dec_measured == Catch::Approx(at(5, 30).t_dec_measured).epsilon(1e-12));
  CHECK(at(7, 60).cpu_share > 0.85);
  for (const auto& r : rows) CHECK(r.frames == (r.level == 0 ? 0 : 11));
}

TEST_CASE("analytic sweep writes its manifest", "[run]") {
  const fs::path dir = scratch("sweep");
  const auto report = run_experiment(ExperimentKind::analytic_sweep, shipped("fig1_chain"), {1}, dir);
  CHECK(report.ok);
  CHECK(fs::exists(dir / "analytic_sweep.csv"));
  CHECK(fs::exists(dir / "summary.txt"));
  std::ifstream is(dir / "manifest.json");
  const auto m = nlohmann::json::parse(is);
  CHECK(m["kind"] == "analytic_sweep");
  CHECK(m["files"].size() == 3);
  CHECK(report.summary.rfind("analytic_sweep on fig1_chain", 0) == 0);
}

TEST_CASE("localization needs a disturbance", "[localization]") {
  Scenario s = shipped("fig1_chain");
  s.attackers.clear();
  const auto r = simulate(s, 1);
  s.localization.warmup = 5;
  s.localization.window = 40;
  const auto run = localize_traces(s, r.trace, r.trace, r.next_hop);
  CHECK(run.suspects.empty());
  CHECK_FALSE(run.located);
  for (const auto& [node, d] : run.delta_pct) CHECK(d == 0.0);
  CHECK(run.paths.size() == s.topology.size() - 1);
}

TEST_CASE("network attack hurts the victim's relayed sources", "[dos]") {
  const auto d = dos_network(shipped("sec6_dos38"), 1);
  auto delta = [&](NodeId n) {
    for (const auto& v : d.variation)
      if (v.node == n) return v.delta_s_pct;
    return 0.0;
  };
  CHECK(delta(8) < -20);
  for (NodeId child : {6, 7, 27}) CHECK(delta(child) < -20);
  const auto gained = std::count_if(d.variation.begin(), d.variation.end(), [](const auto& v) { return v.delta_s_pct > 5; });
  CHECK(gained >= 1);
  for (const auto& v : d.variation)
    if (v.node == 8) CHECK(v.delta_drain_pct > 10);
}

TEST_CASE("demos run end to end", "[demo]") {
  const Scenario s = shipped("replay_demo");
  const auto n = nonce_reuse_demo(s, 1);
  REQUIRE(n.found);
  CHECK(n.exact);
  CHECK(n.t1 < n.t2);
  CHECK_FALSE(n.recovered.empty());
  const auto r = replay_demo(s, 1);
  REQUIRE(r.size() == 2);
  CHECK(r[0].accepted_after_reboot > 0);
  CHECK(r[1].accepted_after_reboot == 0);
}
