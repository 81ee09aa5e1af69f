#include "zigdrain/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace zigdrain {

ParseError::ParseError(std::size_t line, const std::string& reason)
    : Error("line " + std::to_string(line) + ": " + reason), line_(line) {}

DutyCycle Scenario::duty_of(NodeId n) const {
  auto it = overrides.find(n);
  return it != overrides.end() && it->second.duty ? *it->second.duty : duty;
}

bool Scenario::always_on_of(NodeId n) const {
  if (n == topology.gateway) return true;
  auto it = overrides.find(n);
  if (it != overrides.end() && it->second.always_on) return *it->second.always_on;
  return always_on || duty_of(n).always_on();
}

double Scenario::traffic_rate_of(NodeId n) const {
  if (n == topology.gateway) return 0.0;
  auto it = overrides.find(n);
  return it != overrides.end() && it->second.traffic_rate ? *it->second.traffic_rate : traffic_rate;
}

double Scenario::battery_of(NodeId n) const {
  auto it = overrides.find(n);
  return it != overrides.end() && it->second.battery_ah ? *it->second.battery_ah : battery_ah;
}

std::vector<NodeId> Scenario::victims() const {
  std::vector<NodeId> v;
  for (const auto& a : attackers) v.insert(v.end(), a.targets.begin(), a.targets.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

namespace {

void check(bool ok, const std::string& reason) {
  if (!ok) throw ValidationError(reason);
}

std::size_t mac_length_for(SecurityLevel level, std::size_t payload_len) {
  return frame_air_bytes(level, payload_len) - kPhyHeaderLength;
}

}  // namespace

void Scenario::validate() const {
  const auto n = static_cast<NodeId>(topology.size());
  check(n >= 2, "topology needs a gateway and at least one node");
  try {
    topology.validate();
    shortest_path_routes(topology);
    power.validate();
    cost.validate();
    duty.validate();
    for (NodeId i = 0; i < n; ++i) duty_of(i).validate();
    for (const auto& a : attackers) a.validate();
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    throw ValidationError(e.what());
  }
  for (const auto& [id, o] : overrides) check(id >= 0 && id < n, "override for unknown node " + std::to_string(id));
  check(data_rate > 0, "data_rate must be positive");
  for (NodeId i = 0; i < n; ++i) {
    check(traffic_rate_of(i) >= 0, "traffic_rate must be non-negative");
    check(battery_of(i) > battery_threshold_ah, "battery capacity must exceed the threshold");
  }
  check(battery_threshold_ah >= 0, "battery threshold must be non-negative");
  check(traffic_jitter >= 0 && traffic_jitter <= 1, "traffic_jitter must be in [0, 1]");
  check(payload_len >= 16, "payload_len must hold the 16-byte application header");
  check(mac_length_for(level, payload_len) <= kMaxMacFrameLength, "payload_len does not fit a MAC frame at this level");
  check(gateway_clock_factor > 0, "gateway_clock_factor must be positive");
  check(mac_rx_cycles >= 0, "mac_rx_cycles must be non-negative");
  check(mac_queue >= 1 && cpu_queue >= 1, "queue capacities must be at least 1");
  check(csma.min_be >= 0 && csma.min_be <= csma.max_be && csma.max_be <= 8, "csma requires 0 <= min_be <= max_be <= 8");
  check(csma.max_backoffs >= 0 && csma.max_retries >= 0, "csma retry limits must be non-negative");
  check(csma.slot > 0 && csma.turnaround > 0 && csma.ack_wait > 0, "csma timings must be positive");
  for (const auto& a : attackers) {
    check(!a.targets.empty(), "attacker needs at least one target");
    for (NodeId t : a.targets) check(t >= 0 && t < n, "attacker target " + std::to_string(t) + " is not a node");
    check(mac_length_for(a.level, a.payload_len) <= kMaxMacFrameLength, "attacker payload does not fit a MAC frame");
    check(a.stop >= a.start, "attacker stop precedes start");
  }
  check(countermeasures.blacklist_threshold >= 1, "blacklist threshold must be at least 1");
  check(countermeasures.challenge_timeout > 0, "challenge timeout must be positive");
  check(replay_delay >= 0 && replay_spacing > 0, "replay timings must be positive");
  check(!replay || reboot_delay >= 0, "replay requires depleted nodes to reboot");
  check(sim_end > 0, "sim_end must be positive");
  check(!seeds.empty(), "at least one seed is required");
  if (analytic) {
    check(analytic->gen_rate > 0 && analytic->gen_rate <= 1, "analytic gen_rate must be in (0, 1]");
    check(analytic->packet_slots >= 1, "analytic packet_slots must be at least 1");
    check(analytic->mac_be >= 0 && analytic->mac_be <= 8, "analytic mac_be must be in [0, 8]");
    for (double p : analytic->p_att_grid) check(p >= 0 && p <= 1, "analytic p_att values must be in [0, 1]");
    for (const auto& [id, nodes] : analytic->cases)
      for (NodeId v : nodes) check(v >= 0 && v < n, "analytic case lists unknown node " + std::to_string(v));
  }
  const auto& l = localization;
  check(l.delta > 0 && l.delta_prime > 0, "localization thresholds must be positive");
  check(l.window > 0, "localization window must be positive");
  check(l.radius >= 0, "localization radius must be non-negative");
  check(l.min_group_size >= 1, "localization min_group_size must be at least 1");
  check(l.warmup >= 0, "localization warmup must be non-negative");
  for (int lv : levels) check(lv >= 0 && lv <= 7, "experiment levels must be 0..7");
  check(payload_min >= 1 && payload_min <= payload_max && payload_step >= 1, "experiment payload range is invalid");
  check(measure_start >= 0 && measure_start < sim_end, "measure_start must lie inside the run");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& spec) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(spec);
  std::string part;
  auto num = [&spec](const std::string& s) {
    std::size_t pos = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(s, &pos);
    } catch (const std::logic_error&) {
      throw Error("bad seed list '" + spec + "'");
    }
    if (pos != s.size()) throw Error("bad seed list '" + spec + "'");
    return v;
  };
  while (std::getline(ss, part, ',')) {
    part.erase(std::remove_if(part.begin(), part.end(), ::isspace), part.end());
    if (part.empty()) throw Error("bad seed list '" + spec + "'");
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(num(part));
      continue;
    }
    const auto a = num(part.substr(0, dash));
    const auto b = num(part.substr(dash + 1));
    if (b < a || b - a > 100000) throw Error("bad seed range '" + part + "'");
    for (auto s = a; s <= b; ++s) out.push_back(s);
  }
  if (out.empty()) throw Error("empty seed list");
  return out;
}

namespace {

std::size_t line_of(const YAML::Node& n) { return static_cast<std::size_t>(n.Mark().line) + 1; }

template <class T>
const char* type_name() {
  if constexpr (std::is_same_v<T, bool>) return "a boolean";
  if constexpr (std::is_integral_v<T>) return "an integer";
  if constexpr (std::is_floating_point_v<T>) return "a number";
  return "a string";
}

/// A mapping whose keys must all be consumed; leftovers are reported as unknown.
class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsMap()) throw ParseError(line_of(node_), path_ + " must be a mapping");
  }

  bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key].IsDefined(); }

  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    if (!node_ || !node_.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
    const YAML::Node& m = node_;
    const YAML::Node v = m[key];
    return v.IsDefined() ? v : YAML::Node(YAML::NodeType::Undefined);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    const YAML::Node v = child(key);
    if (!v) return;
    out = as<T>(v, key);
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& out) {
    const YAML::Node v = child(key);
    if (v) out = as<T>(v, key);
  }

  template <class T>
  T as(const YAML::Node& v, const std::string& key) const {
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        const auto x = v.as<long long>();
        if (x < 0) throw ParseError(line_of(v), path_ + "." + key + " must be non-negative");
        return static_cast<T>(x);
      } else {
        return v.as<T>();
      }
    } catch (const YAML::Exception&) {
      throw ParseError(line_of(v), path_ + "." + key + ": expected " + type_name<T>());
    }
  }

  void finish() const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) throw ParseError(line_of(kv.first), "unknown key '" + key + "' in " + path_);
    }
  }

  const std::string& path() const { return path_; }

 private:
  const YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

Position parse_position(const YAML::Node& v, const std::string& what) {
  if (!v.IsSequence() || v.size() != 2) throw ParseError(line_of(v), what + " must be [x, y]");
  try {
    return {v[0].as<double>(), v[1].as<double>()};
  } catch (const YAML::Exception&) {
    throw ParseError(line_of(v), what + " coordinates must be numbers");
  }
}

std::vector<Position> parse_positions(const YAML::Node& v, const std::string& what) {
  std::vector<Position> out;
  if (!v) return out;
  if (!v.IsSequence()) throw ParseError(line_of(v), what + " must be a list of [x, y]");
  for (const auto& p : v) out.push_back(parse_position(p, what));
  return out;
}

std::vector<NodeId> parse_ids(const YAML::Node& v, const std::string& what) {
  std::vector<NodeId> out;
  if (!v) return out;
  try {
    if (v.IsScalar()) return {v.as<NodeId>()};
    if (!v.IsSequence()) throw ParseError(line_of(v), what + " must be a node id or list of ids");
    for (const auto& x : v) out.push_back(x.as<NodeId>());
  } catch (const YAML::Exception&) {
    throw ParseError(line_of(v), what + " must contain integer node ids");
  }
  return out;
}

SecurityLevel parse_level(const YAML::Node& v, const std::string& what) {
  try {
    return security_level_from(v.as<int>());
  } catch (const YAML::Exception&) {
    throw ParseError(line_of(v), what + " must be an integer level 0..7");
  } catch (const Error& e) {
    throw ParseError(line_of(v), what + ": " + e.what());
  }
}

DutyCycle parse_duty(const YAML::Node& v, const std::string& path) {
  Section s(v, path);
  DutyCycle d;
  s.get("tau", d.tau);
  s.get("period", d.period);
  s.finish();
  return d;
}

void parse_node_defaults(Scenario& sc, const YAML::Node& v) {
  Section s(v, "nodes");
  if (auto d = s.child("duty")) sc.duty = parse_duty(d, "nodes.duty");
  s.get("always_on", sc.always_on);
  s.get("traffic_rate", sc.traffic_rate);
  s.get("traffic_jitter", sc.traffic_jitter);
  s.get("payload_len", sc.payload_len);
  if (auto l = s.child("level")) sc.level = parse_level(l, "nodes.level");
  s.get("battery_ah", sc.battery_ah);
  s.get("battery_threshold_ah", sc.battery_threshold_ah);
  s.get("mac_queue", sc.mac_queue);
  s.get("cpu_queue", sc.cpu_queue);
  s.get("mac_rx_cycles", sc.mac_rx_cycles);
  s.get("gateway_clock_factor", sc.gateway_clock_factor);
  s.finish();
}

void parse_overrides(Scenario& sc, const YAML::Node& v) {
  if (!v) return;
  if (!v.IsMap()) throw ParseError(line_of(v), "overrides must map node ids to settings");
  for (const auto& kv : v) {
    NodeId id = 0;
    try {
      id = kv.first.as<NodeId>();
    } catch (const YAML::Exception&) {
      throw ParseError(line_of(kv.first), "override keys must be node ids");
    }
    const std::string path = "overrides." + std::to_string(id);
    Section s(kv.second, path);
    NodeOverride o;
    if (auto d = s.child("duty")) o.duty = parse_duty(d, path + ".duty");
    s.get("always_on", o.always_on);
    s.get("traffic_rate", o.traffic_rate);
    s.get("battery_ah", o.battery_ah);
    s.finish();
    sc.overrides[id] = o;
  }
}

AttackerConfig parse_attacker(const YAML::Node& v, std::size_t index) {
  const std::string path = "attackers[" + std::to_string(index) + "]";
  Section s(v, path);
  AttackerConfig a;
  if (auto p = s.child("position"))
    a.position = parse_position(p, path + ".position");
  else
    throw ParseError(line_of(v), path + " needs a position");
  a.targets = parse_ids(s.child("targets"), path + ".targets");
  if (auto m = s.child("rate_model")) {
    try {
      a.rate_model = rate_model_from(m.as<std::string>());
    } catch (const std::exception& e) {
      throw ParseError(line_of(m), path + ".rate_model: " + e.what());
    }
  }
  s.get("rate", a.rate);
  s.get("mean_interval", a.mean_interval);
  s.get("slot_probability", a.slot_probability);
  s.get("slot", a.slot);
  s.get("payload_len", a.payload_len);
  if (auto c = s.child("counter_strategy")) {
    try {
      a.counter_strategy = counter_strategy_from(c.as<std::string>());
    } catch (const std::exception& e) {
      throw ParseError(line_of(c), path + ".counter_strategy: " + e.what());
    }
  }
  if (auto l = s.child("level")) a.level = parse_level(l, path + ".level");
  s.get("blind", a.blind);
  s.get("rendezvous", a.rendezvous);
  s.get("rendezvous_offset", a.rendezvous_offset);
  s.get("phase_jitter", a.phase_jitter);
  s.get("start", a.start);
  s.get("stop", a.stop);
  if (auto sp = s.child("spoof_source")) a.spoof_source = 0x00124b0000000000ULL + s.as<std::uint64_t>(sp, "spoof_source");
  s.finish();
  return a;
}

std::vector<double> parse_grid(const YAML::Node& v, const std::string& path) {
  std::vector<double> out;
  if (!v) return out;
  try {
    if (v.IsSequence()) {
      for (const auto& x : v) out.push_back(x.as<double>());
      return out;
    }
    Section s(v, path);
    double from = 0, to = 0, step = 0;
    s.get("from", from);
    s.get("to", to);
    s.get("step", step);
    s.finish();
    if (!(step > 0) || to < from) throw ParseError(line_of(v), path + " needs from <= to and step > 0");
    const auto count = static_cast<int>(std::floor((to - from) / step + 1e-9));
    for (int i = 0; i <= count; ++i) out.push_back(from + i * step);
  } catch (const YAML::Exception&) {
    throw ParseError(line_of(v), path + " must be a list of numbers or {from, to, step}");
  }
  return out;
}

Scenario build(const YAML::Node& root, const std::string& fallback_name) {
  if (!root || root.IsNull()) throw ParseError(1, "empty scenario");
  if (!root.IsMap()) throw ParseError(line_of(root), "scenario must be a mapping");
  static const std::set<std::string> known{"name",   "sim_end",    "data_rate",      "fast_forward", "stop_when_depleted",
                                            "record_ledger", "seeds", "topology", "nodes", "overrides", "power",
                                            "cpu",    "csma",       "attackers",      "attack",       "countermeasures",
                                            "reboot", "analytic",   "localization",   "experiment"};
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (!known.count(key)) throw ParseError(line_of(kv.first), "unknown key '" + key + "' in scenario");
  }
  Section top(root, "scenario");
  Scenario sc;
  sc.name = fallback_name;
  top.get("name", sc.name);
  top.get("sim_end", sc.sim_end);
  top.get("data_rate", sc.data_rate);
  top.get("fast_forward", sc.fast_forward);
  top.get("stop_when_depleted", sc.stop_when_depleted);
  top.get("record_ledger", sc.record_ledger);
  if (auto seeds = top.child("seeds")) {
    try {
      if (seeds.IsSequence()) {
        sc.seeds.clear();
        for (const auto& x : seeds) sc.seeds.push_back(x.as<std::uint64_t>());
      } else {
        sc.seeds = parse_seed_list(seeds.as<std::string>());
      }
    } catch (const std::exception& e) {
      throw ParseError(line_of(seeds), std::string("seeds: ") + e.what());
    }
  }

  const YAML::Node topo_node = top.child("topology");
  if (!topo_node) throw ValidationError("missing topology section");
  {
    Section s(topo_node, "topology");
    s.get("comm_range", sc.topology.comm_range);
    s.get("interference_range", sc.topology.interference_range);
    if (!s.has("gateway")) throw ValidationError("missing gateway in topology");
    s.get("gateway", sc.topology.gateway);
    sc.topology.positions = parse_positions(s.child("nodes"), "topology.nodes");
    s.finish();
  }
  parse_node_defaults(sc, top.child("nodes"));
  parse_overrides(sc, top.child("overrides"));
  {
    Section s(top.child("power"), "power");
    s.get("p_rx", sc.power.p_rx);
    s.get("p_tx", sc.power.p_tx);
    s.get("p_cpu_active", sc.power.p_cpu_active);
    s.get("p_cpu_idle", sc.power.p_cpu_idle);
    s.get("p_cpu_powersave", sc.power.p_cpu_powersave);
    s.get("voltage", sc.power.voltage);
    s.finish();
  }
  {
    Section s(top.child("cpu"), "cpu");
    s.get("clock_hz", sc.cost.clock_hz);
    s.get("cycles_per_block", sc.cost.cycles_per_block);
    s.get("key_setup_cycles", sc.cost.key_setup_cycles);
    s.get("mic_setup_cycles", sc.cost.mic_setup_cycles);
    s.get("cycles_per_byte_overhead", sc.cost.cycles_per_byte_overhead);
    s.finish();
  }
  {
    Section s(top.child("csma"), "csma");
    s.get("min_be", sc.csma.min_be);
    s.get("max_be", sc.csma.max_be);
    s.get("max_backoffs", sc.csma.max_backoffs);
    s.get("max_retries", sc.csma.max_retries);
    s.get("slot", sc.csma.slot);
    s.get("turnaround", sc.csma.turnaround);
    s.get("ack_wait", sc.csma.ack_wait);
    s.finish();
  }
  if (auto list = top.child("attackers")) {
    if (!list.IsSequence()) throw ParseError(line_of(list), "attackers must be a list");
    for (std::size_t i = 0; i < list.size(); ++i) sc.attackers.push_back(parse_attacker(list[i], i));
  }
  {
    Section s(top.child("attack"), "attack");
    s.get("stop_on_depletion", sc.attacker_stop_on_depletion);
    s.finish();
  }
  {
    Section s(top.child("countermeasures"), "countermeasures");
    auto& c = sc.countermeasures;
    s.get("blacklist", c.blacklist);
    s.get("blacklist_threshold", c.blacklist_threshold);
    s.get("persistent_blacklist", c.persistent_blacklist);
    s.get("challenge", c.challenge);
    s.get("challenge_timeout", c.challenge_timeout);
    s.get("rekey", c.rekey);
    s.get("flash_counters", c.flash_counters);
    s.finish();
  }
  {
    Section s(top.child("reboot"), "reboot");
    s.get("delay", sc.reboot_delay);
    s.get("replay", sc.replay);
    s.get("replay_delay", sc.replay_delay);
    s.get("replay_spacing", sc.replay_spacing);
    s.finish();
  }
  if (auto an = top.child("analytic")) {
    Section s(an, "analytic");
    AnalyticConfig a;
    s.get("gen_rate", a.gen_rate);
    s.get("packet_slots", a.packet_slots);
    s.get("mac_be", a.mac_be);
    a.p_att_grid = parse_grid(s.child("p_att"), "analytic.p_att");
    if (auto cases = s.child("cases")) {
      if (!cases.IsMap()) throw ParseError(line_of(cases), "analytic.cases must map case ids to node lists");
      for (const auto& kv : cases) {
        int id = 0;
        try {
          id = kv.first.as<int>();
        } catch (const YAML::Exception&) {
          throw ParseError(line_of(kv.first), "analytic case ids must be integers");
        }
        a.cases[id] = parse_ids(kv.second, "analytic.cases");
      }
    }
    s.finish();
    sc.analytic = a;
  }
  {
    Section s(top.child("localization"), "localization");
    auto& l = sc.localization;
    s.get("delta", l.delta);
    s.get("delta_prime", l.delta_prime);
    s.get("window", l.window);
    s.get("radius", l.radius);
    s.get("min_group_size", l.min_group_size);
    s.get("warmup", l.warmup);
    l.placements = parse_positions(s.child("placements"), "localization.placements");
    s.finish();
  }
  {
    Section s(top.child("experiment"), "experiment");
    if (auto lv = s.child("levels")) {
      sc.levels.clear();
      for (NodeId x : parse_ids(lv, "experiment.levels")) sc.levels.push_back(x);
    }
    s.get("payload_min", sc.payload_min);
    s.get("payload_max", sc.payload_max);
    s.get("payload_step", sc.payload_step);
    s.get("measure_start", sc.measure_start);
    s.finish();
  }
  top.finish();
  sc.validate();
  return sc;
}

}  // namespace

Scenario parse_scenario_text(const std::string& text, const std::string& name) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(static_cast<std::size_t>(e.mark.line) + 1, e.msg);
  }
  return build(root, name);
}

Scenario parse_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  std::string name = path;
  const auto slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  const auto dot = name.find_last_of('.');
  if (dot != std::string::npos) name = name.substr(0, dot);
  return parse_scenario_text(buf.str(), name);
}

}  // namespace zigdrain
