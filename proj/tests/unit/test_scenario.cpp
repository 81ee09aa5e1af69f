#include <filesystem>

#include "catch_amalgamated.hpp"
#include "zigdrain/scenario.hpp"

using namespace zigdrain;

namespace {

const std::string kRoot = ZIGDRAIN_SOURCE_DIR;

const char* kMinimal = R"(name: tiny
topology:
  gateway: 0
  nodes: [[0, 0], [10, 0]]
)";

std::size_t parse_error_line(const std::string& text) {
  try {
    parse_scenario_text(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("minimal scenario takes documented defaults", "[scenario]") {
  const Scenario s = parse_scenario_text(kMinimal);
  CHECK(s.name == "tiny");
  CHECK(s.topology.size() == 2);
  CHECK(s.topology.comm_range == 30.0);
  CHECK(s.topology.interference_range == 40.0);
  CHECK(s.battery_ah == 2.45);
  CHECK(s.level == SecurityLevel::enc_mic32);
  CHECK(s.seeds == std::vector<std::uint64_t>{1});
  CHECK(s.always_on_of(0));
  CHECK(s.traffic_rate_of(0) == 0.0);
}

TEST_CASE("shipped scenarios parse", "[scenario]") {
  std::size_t count = 0;
  for (const auto& f : std::filesystem::directory_iterator(kRoot + "/scenarios")) {
    if (f.path().extension() != ".yaml") continue;
    INFO(f.path().string());
    CHECK_NOTHROW(parse_scenario(f.path().string()));
    ++count;
  }
  CHECK(count >= 4);
}

TEST_CASE("38-node network with the gateway at the centre", "[scenario]") {
  const Scenario s = parse_scenario(kRoot + "/scenarios/sec6_dos38.yaml");
  CHECK(s.topology.size() == 39);
  CHECK(s.topology.positions[s.topology.gateway].x == 50.0);
  CHECK(s.topology.positions[s.topology.gateway].y == 50.0);
  CHECK(s.topology.comm_range == 30.0);
  CHECK(s.topology.interference_range == 40.0);
  for (const auto& p : s.topology.positions) {
    CHECK(p.x >= 0);
    CHECK(p.x <= 100);
    CHECK(p.y >= 0);
    CHECK(p.y <= 100);
  }
  REQUIRE(s.attackers.size() == 1);
  CHECK(s.attackers[0].rate_model == RateModel::poisson);
  CHECK(s.attackers[0].mean_interval == 0.02);
  CHECK(s.traffic_rate == 1.0);
}

TEST_CASE("victim scenario settings", "[scenario]") {
  const Scenario s = parse_scenario(kRoot + "/scenarios/sec6_victim.yaml");
  CHECK(s.duty.tau / s.duty.period == Catch::Approx(0.01));
  CHECK(s.attackers.at(0).payload_len == 60);
  CHECK(s.attackers.at(0).rate == 10.0);
}

TEST_CASE("semantic problems raise ValidationError", "[scenario]") {
  CHECK_THROWS_AS(parse_scenario_text("name: x\ntopology:\n  nodes: [[0, 0], [10, 0]]\n"), ValidationError);
  CHECK_THROWS_AS(parse_scenario_text(std::string(kMinimal) + "nodes:\n  duty: {tau: 0.2, period: 0.1}\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse_scenario_text("topology:\n  gateway: 0\n  nodes: [[0, 0], [100, 0]]\n"), ValidationError);
  CHECK_THROWS_AS(parse_scenario_text(std::string(kMinimal) + "attackers:\n  - {position: [5, 5], targets: [7]}\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse_scenario_text(std::string(kMinimal) + "nodes:\n  payload_len: 120\n  level: 7\n"),
                  ValidationError);
  CHECK_THROWS_AS(parse_scenario_text(std::string(kMinimal) + "reboot: {replay: true}\n"), ValidationError);
  CHECK_THROWS_AS(parse_scenario_text(std::string(kMinimal) + "power: {p_cpu_idle: 9}\n"), ValidationError);
}

TEST_CASE("syntax problems report the offending line", "[scenario]") {
  CHECK(parse_error_line(std::string(kMinimal) + "bogus: 1\n") == 5);
  CHECK(parse_error_line("name: x\ntopology:\n  gateway: 0\n  colour: red\n  nodes: [[0, 0], [1, 0]]\n") == 4);
  CHECK(parse_error_line(std::string(kMinimal) + "nodes:\n  traffic_rate: fast\n") == 6);
  CHECK(parse_error_line(std::string(kMinimal) + "csma:\n  min_be: 3\n  max_bee: 5\n") == 7);
  CHECK(parse_error_line("name: [unclosed\n") >= 1);
  CHECK_THROWS_AS(parse_scenario(kRoot + "/scenarios/does_not_exist.yaml"), Error);
}

TEST_CASE("seed lists", "[seeds]") {
  CHECK(parse_seed_list("7") == std::vector<std::uint64_t>{7});
  CHECK(parse_seed_list("1-4") == std::vector<std::uint64_t>{1, 2, 3, 4});
  CHECK(parse_seed_list("1,4, 9") == std::vector<std::uint64_t>{1, 4, 9});
  CHECK(parse_seed_list("2-3,8") == std::vector<std::uint64_t>{2, 3, 8});
  CHECK_THROWS_AS(parse_seed_list(""), Error);
  CHECK_THROWS_AS(parse_seed_list("5-2"), Error);
  CHECK_THROWS_AS(parse_seed_list("x"), Error);
  const Scenario s = parse_scenario_text(std::string(kMinimal) + "seeds: \"3-5\"\n");
  CHECK(s.seeds == std::vector<std::uint64_t>{3, 4, 5});
}

TEST_CASE("overrides and analytic grid", "[scenario]") {
  const Scenario s = parse_scenario(kRoot + "/scenarios/fig1_chain.yaml");
  REQUIRE(s.analytic);
  CHECK(s.analytic->p_att_grid.size() == 11);
  CHECK(s.analytic->p_att_grid.back() == Catch::Approx(0.2));
  CHECK(s.analytic->cases.at(1) == std::vector<NodeId>{2, 3});
  CHECK(s.analytic->cases.at(2) == std::vector<NodeId>{3});
  const Scenario r = parse_scenario(kRoot + "/scenarios/replay_demo.yaml");
  CHECK(r.battery_of(1) == 1e-4);
  CHECK(r.battery_of(2) == 2.45);
  CHECK(r.replay);
  CHECK(r.reboot_delay == 5.0);
}
