#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "zigdrain/attacks.hpp"
#include "zigdrain/energy_model.hpp"
#include "zigdrain/topology.hpp"

namespace zigdrain {

struct CsmaParams {
  int min_be = 3;
  int max_be = 5;
  int max_backoffs = 4;
  int max_retries = 3;
  double slot = 320e-6;
  double turnaround = 192e-6;
  double ack_wait = 864e-6;
  bool ack = true;
};

struct CountermeasureConfig {
  bool blacklist = false;
  int blacklist_threshold = 5;
  bool persistent_blacklist = false;
  bool challenge = false;
  double challenge_timeout = 0.5;
  bool rekey = false;
  bool flash_counters = false;  // ACL and sender counters survive a reboot
};

/// Per-node overrides; unset fields fall back to the scenario-wide value.
struct NodeOverride {
  std::optional<DutyCycle> duty;
  std::optional<bool> always_on;
  std::optional<double> traffic_rate;
  std::optional<double> battery_ah;
};

struct AnalyticConfig {
  double gen_rate = 0.02;
  int packet_slots = 3;
  int mac_be = 3;
  std::vector<double> p_att_grid;
  std::map<int, std::vector<NodeId>> cases;  // case id -> interfered nodes
};

struct LocalizationConfig {
  double delta = 5.0;
  double delta_prime = 10.0;
  double window = 60.0;
  double radius = 0.0;  // 0: use the interference range
  std::size_t min_group_size = 2;
  double warmup = 10.0;
  std::vector<Position> placements;
};

struct Scenario {
  std::string name;
  Topology topology;
  double data_rate = 250000.0;

  DutyCycle duty;
  bool always_on = false;
  double traffic_rate = 0.0;      // packets/s per non-gateway node
  double traffic_jitter = 1.0;    // fraction of the interval used to randomize the first packet
  std::size_t payload_len = 20;
  SecurityLevel level = SecurityLevel::enc_mic32;
  std::map<NodeId, NodeOverride> overrides;

  PowerProfile power;
  double battery_ah = 2.45;
  double battery_threshold_ah = 0.0;
  CpuCostModel cost;
  double gateway_clock_factor = 10.0;
  double mac_rx_cycles = 1600.0;
  std::size_t mac_queue = 16;
  std::size_t cpu_queue = 16;
  CsmaParams csma;

  std::vector<AttackerConfig> attackers;
  bool attacker_stop_on_depletion = false;
  CountermeasureConfig countermeasures;

  double reboot_delay = -1.0;  // < 0: depleted nodes stay down
  bool replay = false;         // attacker replays its captures after the victim reboots
  double replay_delay = 1.0;
  double replay_spacing = 0.1;

  double sim_end = 60.0;
  bool fast_forward = true;
  bool stop_when_depleted = false;  // stop once every attacked node is depleted
  bool record_ledger = false;
  std::vector<std::uint64_t> seeds{1};

  std::optional<AnalyticConfig> analytic;
  LocalizationConfig localization;

  // Experiment knobs.
  std::vector<int> levels{0, 1, 2, 3, 4, 5, 6, 7};
  std::size_t payload_min = 10;
  std::size_t payload_max = 100;
  std::size_t payload_step = 10;
  double measure_start = 20.0;  // throughput windows for dos / A/B runs

  DutyCycle duty_of(NodeId n) const;
  bool always_on_of(NodeId n) const;
  double traffic_rate_of(NodeId n) const;
  double battery_of(NodeId n) const;
  std::vector<NodeId> victims() const;

  /// Throws ValidationError describing the first problem found.
  void validate() const;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

Scenario parse_scenario_text(const std::string& text, const std::string& name = "scenario");
Scenario parse_scenario(const std::string& path);

/// Parses "7", "1-5" or "1,4,9".
std::vector<std::uint64_t> parse_seed_list(const std::string& spec);

}  // namespace zigdrain
