#include "zigdrain/mac_sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include "zigdrain/countermeasures.hpp"

namespace zigdrain {

bool duty_awake(const DutyCycle& duty, double t, double phase) {
  if (duty.always_on()) return true;
  const double x = t - phase;
  const double k = std::floor(x / duty.period);
  return x - k * duty.period < duty.tau;
}

ExtAddress node_address(NodeId id) { return 0x00124b0000000000ULL + static_cast<ExtAddress>(id); }

Key link_key(std::uint64_t seed, NodeId a, NodeId b) {
  const auto lo = static_cast<std::uint32_t>(std::min(a, b));
  const auto hi = static_cast<std::uint32_t>(std::max(a, b));
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), lo, hi, 0x4b45u};
  std::mt19937_64 rng(seq);
  Key k{};
  for (auto& b : k) b = static_cast<std::uint8_t>(rng());
  return k;
}

CsmaState csma_begin(const CsmaParams& p) { return {0, p.min_be, 0}; }

int csma_backoff_slots(const CsmaState& s, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, (1 << s.be) - 1);
  return d(rng);
}

CsmaAction csma_after_cca(CsmaState& s, const CsmaParams& p, bool busy) {
  if (!busy) return CsmaAction::transmit;
  ++s.nb;
  s.be = std::min(s.be + 1, p.max_be);
  return s.nb > p.max_backoffs ? CsmaAction::drop : CsmaAction::backoff;
}

CsmaAction csma_after_no_ack(CsmaState& s, const CsmaParams& p) {
  ++s.retries;
  if (s.retries > p.max_retries) return CsmaAction::drop;
  s.nb = 0;
  s.be = p.min_be;
  return CsmaAction::backoff;
}

std::vector<Reception> channel_resolve(const std::vector<Transmission>& txs, const std::vector<Position>& positions,
                                       double comm_range, double interference_range,
                                       const std::vector<NodeId>& listeners) {
  std::vector<Reception> out;
  for (std::size_t i = 0; i < txs.size(); ++i) {
    const auto& t = txs[i];
    for (NodeId r : listeners) {
      if (r == t.sender || distance(positions.at(r), positions.at(t.sender)) > comm_range) continue;
      bool ok = true;
      for (std::size_t j = 0; j < txs.size() && ok; ++j) {
        if (j == i) continue;
        const auto& u = txs[j];
        if (!(u.start < t.end && t.start < u.end)) continue;
        if (u.sender == r || distance(positions.at(r), positions.at(u.sender)) <= interference_range) ok = false;
      }
      out.push_back({i, r, ok});
    }
  }
  return out;
}

Bytes AppPayload::encode(std::size_t length) const {
  if (length < kHeaderLength) throw Error("payload shorter than the application header");
  Bytes b;
  b.reserve(length);
  put_u16(b, kMagic);
  put_u16(b, static_cast<std::uint16_t>(origin));
  put_u32(b, seq);
  put_u64(b, static_cast<std::uint64_t>(std::llround(generated_at * 1e6)));
  while (b.size() < length) b.push_back(static_cast<std::uint8_t>(0xa5 ^ b.size()));
  return b;
}

AppPayload AppPayload::decode(ByteView bytes) {
  AppPayload p;
  if (bytes.size() < kHeaderLength || get_u16(bytes, 0) != kMagic) return p;
  p.origin = get_u16(bytes, 2);
  p.seq = get_u32(bytes, 4);
  p.generated_at = static_cast<double>(get_u64(bytes, 8)) * 1e-6;
  return p;
}

double ledger_charge(const NodeStats& s, const PowerProfile& p) {
  return s.radio_time[1] * p.p_rx + s.radio_time[2] * p.p_tx + s.cpu_time[1] * p.p_cpu_powersave +
         s.cpu_time[2] * p.p_cpu_idle + s.cpu_time[3] * p.p_cpu_active;
}

double SimResult::remaining_ah(const Scenario& s, NodeId n) const {
  return std::max(0.0, s.battery_of(n) - ah_from_mas(nodes.at(n).consumed_mas));
}

namespace {

bool to_micros(double seconds, std::int64_t& out) {
  const double v = seconds * 1e6;
  out = std::llround(v);
  return out > 0 && std::fabs(v - static_cast<double>(out)) < 1e-6;
}

}  // namespace

double hyperperiod(const Scenario& s) {
  if (!s.fast_forward || s.reboot_delay >= 0 || s.replay || s.countermeasures.challenge) return 0.0;
  std::int64_t h = 1;
  auto fold = [&h](double seconds) {
    std::int64_t us = 0;
    if (!to_micros(seconds, us)) return false;
    h = std::lcm(h, us);
    return h <= 60'000'000;
  };
  for (NodeId n = 0; n < static_cast<NodeId>(s.topology.size()); ++n) {
    if (n == s.topology.gateway) continue;
    if (!s.always_on_of(n) && !fold(s.duty_of(n).period)) return 0.0;
    const double r = s.traffic_rate_of(n);
    if (r > 0 && !fold(1.0 / r)) return 0.0;
  }
  for (const auto& a : s.attackers) {
    if (a.rate_model != RateModel::constant || a.phase_jitter > 0) return 0.0;
    if (!fold(1.0 / a.rate)) return 0.0;
  }
  return static_cast<double>(h) * 1e-6;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint8_t kCmdChallenge = 0x01;
constexpr std::uint8_t kCmdResponse = 0x02;
constexpr std::size_t kMaxCaptures = 4096;
constexpr std::size_t kAckAirBytes = kPhyHeaderLength + kAckFrameLength;
constexpr NodeId kSystem = std::numeric_limits<NodeId>::max();

enum class Ev : std::uint8_t {
  tx_end,
  ack_timeout,
  cpu_done,
  backoff_end,
  tx_start,
  ack_start,
  wake,
  active_end,
  traffic,
  attack,
  replay,
  reboot,
  ff_check,
};

struct Event {
  double t = 0.0;
  NodeId node = kNoNode;
  Ev kind = Ev::wake;
  std::uint64_t seq = 0;
  std::uint64_t token = 0;
  std::int64_t arg = 0;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    if (a.t != b.t) return a.t > b.t;
    if (a.node != b.node) return a.node > b.node;
    if (a.kind != b.kind) return a.kind > b.kind;
    return a.seq > b.seq;
  }
};

using PacketKey = std::int64_t;

struct PacketRec {
  NodeId origin = kNoNode;
  int copies = 0;
  bool delivered = false;
  bool dropped = false;
};

struct OutFrame {
  Bytes wire;
  NodeId dst = kNoNode;
  PacketKey packet = -1;
  bool ack_request = true;
  std::uint8_t seq = 0;
  std::uint32_t counter = 0;
};

struct Tx {
  NodeId sender = kNoNode;
  double start = 0.0;
  double end = 0.0;
  Bytes wire;
  std::size_t air = 0;
  bool is_ack = false;
  bool ack_request = false;
  std::uint8_t seq = 0;
  std::uint32_t counter = 0;
  NodeId ack_target = kNoNode;  // entity the ACK answers
  std::uint16_t dst_short = 0xffff;
  PacketKey packet = -1;
  std::vector<NodeId> attempted;
};

enum class RxAction { none, command, challenge, decrypted, plain };

struct CpuJob {
  bool tx = false;
  Bytes data;  // rx: wire bytes; tx: plaintext payload
  NodeId from = kNoNode;
  NodeId next = kNoNode;
  PacketKey packet = -1;
  // Filled when an rx job starts.
  RxAction action = RxAction::none;
  SecurityStatus status = SecurityStatus::ok;
  bool crypto = false;
  ExtAddress source = 0;
  std::uint32_t counter = 0;
  Bytes payload;
};

struct Node {
  NodeId id = 0;
  bool gateway = false;
  bool alive = true;
  bool always_on = false;
  DutyCycle duty;
  double capacity_mas = 0.0;
  double usable_mas = 0.0;

  // Effective power state, changed only by refresh().
  RadioState radio = RadioState::off;
  CpuState cpu = CpuState::powersave;
  double current = 0.0;
  double last_t = 0.0;
  double depletion_at = kInf;
  double ledger_mark = 0.0;

  // Flags driving the power state.
  bool window = false;
  bool tx_now = false;
  bool mac_busy = false;
  bool awaiting_ack = false;
  bool cpu_busy = false;
  int ack_pending = 0;
  NodeId tx_id = -1;

  std::uint64_t epoch = 0;
  std::uint64_t mac_token = 0;

  double traffic_rate = 0.0;
  double traffic_phase = 0.0;
  std::uint32_t app_seq = 0;

  std::deque<OutFrame> queue;
  CsmaState csma;
  std::uint8_t mac_seq = 0;
  std::deque<CpuJob> jobs;

  std::int64_t locked = -1;
  bool lock_corrupt = false;
  int interferers = 0;

  AclTable acl;
  std::uint32_t out_counter = 1;
  BlacklistState blacklist;
  ChallengeTable challenges;
  bool need_verify = false;
  std::set<ExtAddress> verified;

  std::mt19937_64 rng;
  NodeStats stats;
};

struct Attacker {
  AttackerConfig cfg;
  NodeId entity = kNoNode;
  AttackClock clock;
  std::mt19937_64 rng;
  std::map<ExtAddress, std::uint32_t> observed;
  bool tx_now = false;
  int interferers = 0;
  bool stopped = false;
  std::uint64_t fired = 0;
  std::size_t rr = 0;
  std::uint8_t seq = 0;
  std::vector<CapturedFrame> captures;
  std::vector<TimedFrame> replay;
};

struct Snapshot {
  std::vector<NodeStats> stats;
  std::uint64_t events = 0;
  std::size_t trace_size = 0;
  std::vector<std::uint64_t> fired;
  std::vector<std::map<ExtAddress, std::uint32_t>> observed;
};

class Simulator {
 public:
  Simulator(const Scenario& s, std::uint64_t seed) : s_(s), seed_(seed) { setup(); }

  SimResult run();

 private:
  const Scenario& s_;
  std::uint64_t seed_;
  double now_ = 0.0;
  std::uint64_t seq_ = 0;
  std::uint64_t events_ = 0;
  std::vector<Event> heap_;
  std::set<std::pair<double, NodeId>> depletions_;
  std::vector<Node> nodes_;
  std::vector<Attacker> attackers_;
  std::vector<Position> pos_;
  std::vector<std::vector<NodeId>> comm_nbr_, intf_nbr_;
  std::vector<NodeId> next_hop_;
  std::map<std::pair<NodeId, NodeId>, Key> keys_;
  std::unordered_map<PacketKey, PacketRec> packets_;
  std::map<std::int64_t, Tx> txs_;
  std::int64_t next_tx_ = 0;
  std::vector<char> dirty_;
  std::vector<NodeId> dirty_list_;
  std::vector<NodeId> watch_;
  SimResult res_;
  double mac_rx_time_ = 0.0;
  double hyper_ = 0.0;
  std::deque<Snapshot> snaps_;

  int node_count() const { return static_cast<int>(nodes_.size()); }
  bool is_node(NodeId e) const { return e >= 0 && e < node_count(); }

  void setup();
  void push(double t, NodeId node, Ev kind, std::uint64_t token = 0, std::int64_t arg = 0);
  void log(NodeId node, TraceEvent ev, NodeId counterpart = kNoNode, std::uint32_t bytes = 0, std::int64_t detail = 0) {
    res_.trace.add({now_, node, ev, counterpart, bytes, detail});
  }
  void touch(NodeId n) {
    if (!dirty_[n]) {
      dirty_[n] = 1;
      dirty_list_.push_back(n);
    }
  }
  void flush_dirty();
  void account(Node& nd);
  void refresh(NodeId n);
  void reschedule_depletion(Node& nd);

  double cpu_time(const Node& nd, double seconds) const {
    return nd.gateway ? seconds / s_.gateway_clock_factor : seconds;
  }
  Key& key(NodeId a, NodeId b) { return keys_.at({std::min(a, b), std::max(a, b)}); }
  NodeId node_of(ExtAddress a) const {
    const auto d = static_cast<std::int64_t>(a - node_address(0));
    return d >= 0 && d < node_count() ? static_cast<NodeId>(d) : kNoNode;
  }

  // Packet bookkeeping.
  void hold(PacketKey k) {
    if (k >= 0) ++packets_.at(k).copies;
  }
  void release(NodeId at, PacketKey k);

  // MAC.
  void mac_enqueue(NodeId n, OutFrame f);
  void mac_kick(NodeId n);
  void schedule_backoff(NodeId n);
  void mac_done(NodeId n);
  void on_backoff_end(NodeId n);
  void on_tx_start(NodeId n);
  void on_ack_timeout(NodeId n);
  void send_command(NodeId n, NodeId to, Bytes payload);

  // Channel.
  std::int64_t start_tx(NodeId sender, Tx tx);
  void finish_tx(std::int64_t id, bool truncated);
  void on_receive(NodeId r, const Tx& tx);
  void eavesdrop(const Tx& tx);

  // CPU.
  void cpu_enqueue(NodeId n, CpuJob job);
  void cpu_kick(NodeId n);
  void start_rx_job(Node& nd, CpuJob& job, double& duration);
  void on_cpu_done(NodeId n);
  void finish_rx_job(NodeId n, CpuJob& job);
  void accept_packet(NodeId n, const Bytes& plain, PacketKey& held);

  // Lifecycle.
  void on_wake(NodeId n, std::int64_t k);
  void on_traffic(NodeId n, std::int64_t k);
  void deplete(NodeId n);
  void reboot(NodeId n);
  void on_attack(std::size_t a);
  void on_replay(std::size_t a, std::int64_t idx);
  void fast_forward_check();
  bool watched_all_down() const;
};

void Simulator::push(double t, NodeId node, Ev kind, std::uint64_t token, std::int64_t arg) {
  heap_.push_back({t, node, kind, seq_++, token, arg});
  std::push_heap(heap_.begin(), heap_.end(), Later{});
}

void Simulator::setup() {
  s_.validate();
  const auto& topo = s_.topology;
  const int n = static_cast<int>(topo.size());
  next_hop_ = shortest_path_routes(topo);
  pos_ = topo.positions;
  for (const auto& a : s_.attackers) pos_.push_back(a.position);
  const int entities = static_cast<int>(pos_.size());
  comm_nbr_.assign(entities, {});
  intf_nbr_.assign(entities, {});
  for (int a = 0; a < entities; ++a)
    for (int b = 0; b < entities; ++b) {
      if (a == b) continue;
      const double d = distance(pos_[a], pos_[b]);
      if (d <= topo.comm_range) comm_nbr_[a].push_back(b);
      if (d <= topo.interference_range) intf_nbr_[a].push_back(b);
    }

  mac_rx_time_ = s_.mac_rx_cycles / s_.cost.clock_hz;
  nodes_.resize(n);
  dirty_.assign(n, 0);
  res_.nodes.assign(n, {});
  for (NodeId i = 0; i < n; ++i) {
    Node& nd = nodes_[i];
    nd.id = i;
    nd.gateway = i == topo.gateway;
    nd.always_on = nd.gateway || s_.always_on_of(i);
    nd.duty = s_.duty_of(i);
    nd.capacity_mas = s_.battery_of(i) * 3.6e6;
    nd.usable_mas = (s_.battery_of(i) - s_.battery_threshold_ah) * 3.6e6;
    nd.traffic_rate = nd.gateway ? 0.0 : s_.traffic_rate_of(i);
    std::seed_seq sq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                     static_cast<std::uint32_t>(i), 0x6e6fu};
    nd.rng.seed(sq);
    nd.blacklist.threshold = s_.countermeasures.blacklist_threshold;
    nd.blacklist.persistent = s_.countermeasures.persistent_blacklist;
    nd.challenges = ChallengeTable(nd.rng(), s_.countermeasures.challenge_timeout);
  }
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j : comm_nbr_[i]) {
      if (!is_node(j)) continue;
      if (i < j) keys_[{i, j}] = link_key(seed_, i, j);
      nodes_[i].acl.add(node_address(j), link_key(seed_, i, j));
    }

  for (std::size_t a = 0; a < s_.attackers.size(); ++a) {
    const auto& cfg = s_.attackers[a];
    const NodeId first = cfg.targets.empty() ? kNoNode : cfg.targets.front();
    const DutyCycle victim_duty = first == kNoNode ? s_.duty : s_.duty_of(first);
    std::seed_seq sq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                     static_cast<std::uint32_t>(a), 0x6174u};
    std::mt19937_64 rng(sq);
    const std::uint64_t clock_seed = rng();
    attackers_.push_back({cfg, n + static_cast<NodeId>(a), AttackClock(cfg, victim_duty, clock_seed), rng, {}, false, 0,
                          false, 0, 0, 0, {}, {}});
  }

  for (const auto& a : s_.attackers) watch_.insert(watch_.end(), a.targets.begin(), a.targets.end());
  std::sort(watch_.begin(), watch_.end());
  watch_.erase(std::unique(watch_.begin(), watch_.end()), watch_.end());
  if (watch_.empty())
    for (NodeId i = 0; i < n; ++i)
      if (i != topo.gateway) watch_.push_back(i);

  for (NodeId i = 0; i < n; ++i) {
    Node& nd = nodes_[i];
    if (!nd.always_on) push(0.0, i, Ev::wake, nd.epoch, 0);
    if (nd.traffic_rate > 0) {
      const double interval = 1.0 / nd.traffic_rate;
      std::uniform_real_distribution<double> u(0.0, s_.traffic_jitter * interval);
      nd.traffic_phase = u(nd.rng);
      push(nd.traffic_phase, i, Ev::traffic, 0, 0);
    }
    touch(i);
  }
  for (std::size_t a = 0; a < attackers_.size(); ++a) {
    const double t = attackers_[a].clock.next();
    if (t >= 0) push(t, attackers_[a].entity, Ev::attack);
  }
  hyper_ = hyperperiod(s_);
  res_.skip_period = hyper_;
  if (hyper_ > 0) push(hyper_, kSystem, Ev::ff_check);
  flush_dirty();
}

void Simulator::account(Node& nd) {
  const double dt = now_ - nd.last_t;
  if (dt > 0) {
    nd.stats.radio_time[static_cast<int>(nd.radio)] += dt;
    nd.stats.cpu_time[static_cast<int>(nd.cpu)] += dt;
    const double q = nd.current * dt;
    nd.stats.consumed_mas += q;
    nd.stats.consumed_total_mas += q;
  }
  nd.last_t = now_;
}

void Simulator::reschedule_depletion(Node& nd) {
  if (nd.depletion_at < kInf) depletions_.erase({nd.depletion_at, nd.id});
  nd.depletion_at = kInf;
  if (nd.gateway || !nd.alive || !(nd.current > 0)) return;
  nd.depletion_at = now_ + std::max(0.0, nd.usable_mas - nd.stats.consumed_mas) / nd.current;
  depletions_.insert({nd.depletion_at, nd.id});
}

void Simulator::refresh(NodeId n) {
  Node& nd = nodes_[n];
  account(nd);
  RadioState r = RadioState::off;
  CpuState c = CpuState::off;
  if (nd.alive) {
    if (nd.tx_now)
      r = RadioState::tx;
    else if (nd.window || nd.always_on || nd.locked >= 0 || nd.mac_busy || nd.ack_pending > 0)
      r = RadioState::rx;
    c = nd.cpu_busy ? CpuState::active : (r != RadioState::off ? CpuState::idle : CpuState::powersave);
  }
  if (r == nd.radio && c == nd.cpu) return;
  if (nd.alive && nd.radio == RadioState::off && r != RadioState::off) log(n, TraceEvent::wake);
  if (nd.alive && nd.radio != RadioState::off && r == RadioState::off) log(n, TraceEvent::sleep);
  nd.radio = r;
  nd.cpu = c;
  const auto& p = s_.power;
  const double radio_ma[] = {0.0, p.p_rx, p.p_tx};
  const double cpu_ma[] = {0.0, p.p_cpu_powersave, p.p_cpu_idle, p.p_cpu_active};
  nd.current = radio_ma[static_cast<int>(r)] + cpu_ma[static_cast<int>(c)];
  reschedule_depletion(nd);
  if (s_.record_ledger) {
    static constexpr const char* kRadio[] = {"off", "rx", "tx"};
    static constexpr const char* kCpu[] = {"off", "powersave", "idle", "active"};
    const double v = s_.power.voltage * 1e-3;
    res_.ledger.push_back({now_, n, std::string(kRadio[static_cast<int>(r)]) + "+" + kCpu[static_cast<int>(c)],
                           nd.current, (nd.stats.consumed_total_mas - nd.ledger_mark) * v,
                           std::max(0.0, nd.capacity_mas - nd.stats.consumed_mas) / 3.6e6});
    nd.ledger_mark = nd.stats.consumed_total_mas;
  }
}

void Simulator::flush_dirty() {
  std::sort(dirty_list_.begin(), dirty_list_.end());
  for (NodeId n : dirty_list_) {
    dirty_[n] = 0;
    refresh(n);
  }
  dirty_list_.clear();
}

void Simulator::release(NodeId at, PacketKey k) {
  if (k < 0) return;
  auto& rec = packets_.at(k);
  if (--rec.copies > 0 || rec.delivered || rec.dropped) return;
  rec.dropped = true;
  ++nodes_[rec.origin].stats.dropped;
  log(at, TraceEvent::drop, kNoNode, 0, rec.origin);
}

void Simulator::mac_enqueue(NodeId n, OutFrame f) {
  Node& nd = nodes_[n];
  const std::size_t pending = nd.queue.size() - (nd.mac_busy ? 1 : 0);
  if (pending >= s_.mac_queue) {
    const auto victim = nd.queue.begin() + (nd.mac_busy ? 1 : 0);
    release(n, victim->packet);
    nd.queue.erase(victim);
  }
  nd.queue.push_back(std::move(f));
  mac_kick(n);
}

void Simulator::mac_kick(NodeId n) {
  Node& nd = nodes_[n];
  if (!nd.alive || nd.mac_busy || nd.queue.empty()) return;
  if (!(nd.window || nd.always_on)) return;
  nd.mac_busy = true;
  nd.csma = csma_begin(s_.csma);
  schedule_backoff(n);
  touch(n);
}

void Simulator::schedule_backoff(NodeId n) {
  Node& nd = nodes_[n];
  const int slots = csma_backoff_slots(nd.csma, nd.rng);
  push(now_ + slots * s_.csma.slot, n, Ev::backoff_end, nd.mac_token);
}

void Simulator::mac_done(NodeId n) {
  Node& nd = nodes_[n];
  OutFrame f = std::move(nd.queue.front());
  nd.queue.pop_front();
  // A delivered frame is now held by its receiver, so this copy can go either way.
  release(n, f.packet);
  nd.mac_busy = false;
  nd.awaiting_ack = false;
  ++nd.mac_token;
  touch(n);
  mac_kick(n);
}

void Simulator::on_backoff_end(NodeId n) {
  Node& nd = nodes_[n];
  const bool busy = nd.interferers > 0 || nd.locked >= 0 || nd.tx_now || nd.ack_pending > 0;
  switch (csma_after_cca(nd.csma, s_.csma, busy)) {
    case CsmaAction::transmit:
      push(now_ + s_.csma.slot, n, Ev::tx_start, nd.mac_token);
      break;
    case CsmaAction::backoff:
      schedule_backoff(n);
      break;
    case CsmaAction::drop:
      mac_done(n);
      break;
  }
}

void Simulator::on_tx_start(NodeId n) {
  Node& nd = nodes_[n];
  if (nd.tx_now || nd.queue.empty()) {
    on_backoff_end(n);
    return;
  }
  const OutFrame& f = nd.queue.front();
  Tx tx;
  tx.wire = f.wire;
  tx.air = f.wire.size() + kPhyHeaderLength;
  tx.ack_request = f.ack_request;
  tx.seq = f.seq;
  tx.counter = f.counter;
  tx.dst_short = static_cast<std::uint16_t>(f.dst);
  tx.packet = f.packet;
  nd.tx_id = start_tx(n, std::move(tx));
  nd.tx_now = true;
  nd.locked = -1;
  touch(n);
}

void Simulator::on_ack_timeout(NodeId n) {
  Node& nd = nodes_[n];
  nd.awaiting_ack = false;
  if (csma_after_no_ack(nd.csma, s_.csma) == CsmaAction::drop) {
    mac_done(n);
    return;
  }
  schedule_backoff(n);
}

void Simulator::send_command(NodeId n, NodeId to, Bytes payload) {
  Node& nd = nodes_[n];
  SecuredFrame f;
  f.header.type = FrameType::command;
  f.header.ack_request = true;
  f.header.sequence = nd.mac_seq++;
  f.header.destination = static_cast<ShortAddress>(to);
  f.header.source = node_address(n);
  f.payload = std::move(payload);
  OutFrame o;
  o.wire = encode_frame(f);
  o.dst = to;
  o.seq = f.header.sequence;
  mac_enqueue(n, std::move(o));
}

std::int64_t Simulator::start_tx(NodeId sender, Tx tx) {
  const std::int64_t id = next_tx_++;
  tx.sender = sender;
  tx.start = now_;
  tx.end = now_ + airtime(tx.air, s_.data_rate);
  log(sender, TraceEvent::tx_start, is_node(sender) && !tx.is_ack ? static_cast<NodeId>(tx.dst_short) : tx.ack_target,
      static_cast<std::uint32_t>(tx.air), tx.is_ack ? 1 : 0);
  if (is_node(sender)) ++nodes_[sender].stats.tx_frames;
  for (NodeId r : intf_nbr_[sender]) {
    if (!is_node(r)) {
      ++attackers_[r - node_count()].interferers;
      continue;
    }
    Node& nd = nodes_[r];
    const bool listening = nd.alive && nd.radio == RadioState::rx && !nd.tx_now;
    const bool in_comm = distance(pos_[sender], pos_[r]) <= s_.topology.comm_range;
    if (listening && in_comm) {
      tx.attempted.push_back(r);
      if (nd.interferers == 0 && nd.locked < 0) {
        nd.locked = id;
        nd.lock_corrupt = false;
      }
    }
    if (nd.locked >= 0 && nd.locked != id) nd.lock_corrupt = true;
    ++nd.interferers;
  }
  const double end = tx.end;
  txs_.emplace(id, std::move(tx));
  push(end, sender, Ev::tx_end, 0, id);
  return id;
}

void Simulator::finish_tx(std::int64_t id, bool truncated) {
  auto it = txs_.find(id);
  if (it == txs_.end()) return;
  Tx tx = std::move(it->second);
  txs_.erase(it);
  log(tx.sender, TraceEvent::tx_end, kNoNode, static_cast<std::uint32_t>(tx.air), tx.is_ack ? 1 : 0);
  for (NodeId r : intf_nbr_[tx.sender]) {
    if (is_node(r))
      --nodes_[r].interferers;
    else
      --attackers_[r - node_count()].interferers;
  }
  std::vector<NodeId> decoded;
  for (NodeId r : tx.attempted) {
    Node& nd = nodes_[r];
    const bool ok = !truncated && nd.alive && nd.locked == id && !nd.lock_corrupt;
    if (nd.locked == id) {
      nd.locked = -1;
      touch(r);
    }
    if (!nd.alive) continue;
    if (ok) {
      log(r, TraceEvent::rx_ok, tx.sender, static_cast<std::uint32_t>(tx.air), tx.is_ack ? tx.seq : tx.counter);
      ++nd.stats.rx_ok;
      decoded.push_back(r);
    } else {
      log(r, TraceEvent::rx_collision, tx.sender, static_cast<std::uint32_t>(tx.air));
      ++nd.stats.rx_collision;
    }
  }
  if (is_node(tx.sender)) {
    Node& snd = nodes_[tx.sender];
    snd.tx_now = false;
    snd.tx_id = -1;
    touch(tx.sender);
    if (!truncated && !tx.is_ack) {
      if (tx.ack_request) {
        snd.awaiting_ack = true;
        push(now_ + s_.csma.ack_wait, tx.sender, Ev::ack_timeout, snd.mac_token);
      } else {
        mac_done(tx.sender);
      }
    }
  } else {
    attackers_[tx.sender - node_count()].tx_now = false;
  }
  for (NodeId r : decoded) on_receive(r, tx);
  if (!truncated && !tx.is_ack && is_node(tx.sender)) eavesdrop(tx);
}

void Simulator::eavesdrop(const Tx& tx) {
  for (NodeId e : comm_nbr_[tx.sender]) {
    if (is_node(e)) continue;
    Attacker& a = attackers_[e - node_count()];
    if (a.tx_now) continue;
    SecuredFrame f;
    try {
      f = decode_frame(tx.wire);
    } catch (const Error&) {
      continue;
    }
    if (!f.header.security_enabled) continue;
    auto& obs = a.observed[f.header.source];
    obs = std::max(obs, f.frame_counter());
    if (!s_.replay || a.captures.size() >= kMaxCaptures) continue;
    for (NodeId t : a.cfg.targets)
      if (f.header.destination == static_cast<ShortAddress>(t) || f.header.source == node_address(t)) {
        a.captures.push_back(CapturedFrame::from_wire(tx.wire, now_));
        res_.captures.push_back(a.captures.back());
        break;
      }
  }
}

void Simulator::on_receive(NodeId r, const Tx& tx) {
  Node& nd = nodes_[r];
  if (tx.is_ack) {
    if (tx.ack_target == r && nd.awaiting_ack && !nd.queue.empty() && nd.queue.front().seq == tx.seq) {
      nd.awaiting_ack = false;
      mac_done(r);
    }
    return;
  }
  const bool addressed = tx.dst_short == static_cast<std::uint16_t>(r) || tx.dst_short == 0xffff;
  if (addressed && tx.ack_request && tx.dst_short != 0xffff) {
    ++nd.ack_pending;
    push(now_ + s_.csma.turnaround, r, Ev::ack_start, nd.epoch, (static_cast<std::int64_t>(tx.sender) << 8) | tx.seq);
    touch(r);
  }
  CpuJob job;
  job.data = tx.wire;
  job.from = tx.sender;
  if (addressed && tx.packet >= 0) {
    const auto& rec = packets_.at(tx.packet);
    if (!rec.delivered && !rec.dropped) {
      hold(tx.packet);
      job.packet = tx.packet;
    }
  }
  cpu_enqueue(r, std::move(job));
}

void Simulator::cpu_enqueue(NodeId n, CpuJob job) {
  Node& nd = nodes_[n];
  const std::size_t pending = nd.jobs.size() - (nd.cpu_busy ? 1 : 0);
  if (pending >= s_.cpu_queue) {
    const auto victim = nd.jobs.begin() + (nd.cpu_busy ? 1 : 0);
    release(n, victim->packet);
    nd.jobs.erase(victim);
  }
  nd.jobs.push_back(std::move(job));
  cpu_kick(n);
}

void Simulator::cpu_kick(NodeId n) {
  Node& nd = nodes_[n];
  if (!nd.alive || nd.cpu_busy || nd.jobs.empty()) return;
  CpuJob& job = nd.jobs.front();
  double duration = 0.0;
  if (job.tx)
    duration = processing_time(s_.cost, s_.level, job.data.size());
  else
    start_rx_job(nd, job, duration);
  nd.cpu_busy = true;
  touch(n);
  push(now_ + cpu_time(nd, duration), n, Ev::cpu_done, nd.epoch);
}

void Simulator::start_rx_job(Node& nd, CpuJob& job, double& duration) {
  duration = mac_rx_time_;
  job.action = RxAction::none;
  SecuredFrame f;
  try {
    f = decode_frame(job.data);
  } catch (const Error&) {
    return;
  }
  const auto me = static_cast<ShortAddress>(nd.id);
  if (f.header.destination != me && f.header.destination != 0xffff) return;
  job.source = f.header.source;
  if (f.header.type == FrameType::command) {
    job.action = RxAction::command;
    job.payload = f.payload;
    duration += processing_time(s_.cost, SecurityLevel::mic64, ChallengeNonce{}.size() + 8);
    return;
  }
  if (f.header.type != FrameType::data) return;
  if (s_.countermeasures.blacklist && nd.blacklist.contains(f.header.source)) {
    log(nd.id, TraceEvent::rx_blacklisted, job.from, 0, f.frame_counter());
    ++nd.stats.blacklisted_rx;
    return;
  }
  if (!f.header.security_enabled) {
    job.action = RxAction::plain;
    job.payload = f.payload;
    return;
  }
  AclEntry* entry = nd.acl.find(f.header.source);
  if (!entry) return;
  if (s_.countermeasures.challenge && nd.need_verify && !nd.verified.count(f.header.source)) {
    job.action = RxAction::challenge;
    return;
  }
  job.counter = f.frame_counter();
  const UnsecureResult r = unsecure_frame(*entry, f);
  job.action = RxAction::decrypted;
  job.status = r.status;
  job.crypto = r.crypto_performed;
  job.payload = r.payload;
  if (r.crypto_performed) {
    log(nd.id, TraceEvent::decrypt_start, job.from, static_cast<std::uint32_t>(f.payload.size()), job.counter);
    ++nd.stats.crypto_ops;
    duration += processing_time(s_.cost, f.level(), f.payload.size());
  }
}

void Simulator::on_cpu_done(NodeId n) {
  Node& nd = nodes_[n];
  CpuJob job = std::move(nd.jobs.front());
  nd.jobs.pop_front();
  nd.cpu_busy = false;
  touch(n);
  if (job.tx) {
    MacHeader h;
    h.type = FrameType::data;
    h.ack_request = true;
    h.sequence = nd.mac_seq++;
    h.destination = static_cast<ShortAddress>(job.next);
    h.source = node_address(n);
    OutFrame o;
    o.dst = job.next;
    o.seq = h.sequence;
    o.packet = job.packet;
    o.counter = s_.level == SecurityLevel::none ? 0 : nd.out_counter;
    const SecuredFrame f =
        secure_frame(key(n, job.next), h, job.data, s_.level, s_.level == SecurityLevel::none ? 0 : nd.out_counter++);
    o.wire = encode_frame(f);
    mac_enqueue(n, std::move(o));
  } else {
    finish_rx_job(n, job);
  }
  cpu_kick(n);
}

void Simulator::finish_rx_job(NodeId n, CpuJob& job) {
  Node& nd = nodes_[n];
  const bool from_attacker = !is_node(job.from);
  const NodeId src_node = node_of(job.source);
  switch (job.action) {
    case RxAction::none:
      break;
    case RxAction::command: {
      if (src_node == kNoNode || job.payload.empty()) break;
      if (job.payload[0] == kCmdChallenge && job.payload.size() == 1 + ChallengeNonce{}.size()) {
        ChallengeNonce nonce{};
        std::copy(job.payload.begin() + 1, job.payload.end(), nonce.begin());
        Bytes resp{kCmdResponse};
        const Bytes mac = challenge_response(key(n, src_node), nonce, node_address(n));
        resp.insert(resp.end(), mac.begin(), mac.end());
        send_command(n, src_node, std::move(resp));
      } else if (job.payload[0] == kCmdResponse) {
        ChallengeSession* session = nd.challenges.find(job.source);
        if (!session || session->state != ChallengeState::pending) break;
        const ByteView resp(job.payload.data() + 1, job.payload.size() - 1);
        const auto st = verify_response(key(n, src_node), *session, resp, now_, s_.countermeasures.challenge_timeout);
        if (st == ChallengeState::verified) {
          nd.verified.insert(job.source);
          log(n, TraceEvent::challenge_ok, src_node);
        } else {
          log(n, TraceEvent::challenge_fail, src_node);
        }
        nd.challenges.erase(job.source);
      }
      break;
    }
    case RxAction::challenge: {
      if (src_node == kNoNode) break;
      if (nd.challenges.pending(job.source, now_)) break;
      nd.challenges.erase(job.source);
      const ChallengeSession& session = issue_challenge(nd.challenges, job.source, now_);
      Bytes cmd{kCmdChallenge};
      cmd.insert(cmd.end(), session.nonce.begin(), session.nonce.end());
      log(n, TraceEvent::challenge_issue, src_node);
      send_command(n, src_node, std::move(cmd));
      break;
    }
    case RxAction::decrypted: {
      if (job.crypto) log(n, TraceEvent::decrypt_end, job.from, 0, job.counter);
      const NodeId shown = src_node == kNoNode ? job.from : src_node;
      if (job.status == SecurityStatus::replay_rejected) {
        log(n, TraceEvent::rx_replay_reject, job.from, 0, job.counter);
        ++nd.stats.replay_reject;
        if (s_.countermeasures.blacklist) blacklist_observe(nd.blacklist, job.source, FrameOutcome::replay_reject);
        break;
      }
      if (job.status == SecurityStatus::integrity_failure) {
        log(n, TraceEvent::rx_integrity_fail, job.from, 0, job.counter);
        ++nd.stats.integrity_fail;
        if (s_.countermeasures.blacklist &&
            blacklist_observe(nd.blacklist, job.source, FrameOutcome::integrity_fail))
          log(n, TraceEvent::blacklist_add, shown);
        break;
      }
      if (job.status != SecurityStatus::ok) break;
      if (s_.countermeasures.blacklist) blacklist_observe(nd.blacklist, job.source, FrameOutcome::ok);
      const bool valid = AppPayload::decode(job.payload).origin != kNoNode;
      if (from_attacker || !valid) {
        log(n, TraceEvent::rx_unauth_accept, job.from, 0, job.counter);
        ++nd.stats.unauth_accept;
      }
      if (valid) accept_packet(n, job.payload, job.packet);
      break;
    }
    case RxAction::plain:
      accept_packet(n, job.payload, job.packet);
      break;
  }
  release(n, job.packet);
}

void Simulator::accept_packet(NodeId n, const Bytes& plain, PacketKey& held) {
  const AppPayload ap = AppPayload::decode(plain);
  if (ap.origin == kNoNode) return;
  const PacketKey k = (static_cast<PacketKey>(ap.origin) << 32) | ap.seq;
  auto it = packets_.find(k);
  if (it == packets_.end()) return;
  PacketRec& rec = it->second;
  if (rec.delivered || rec.dropped) return;
  if (held < 0) {
    hold(k);
    held = k;
  }
  if (n == s_.topology.gateway) {
    rec.delivered = true;
    ++nodes_[rec.origin].stats.delivered;
    log(n, TraceEvent::deliver, rec.origin, static_cast<std::uint32_t>(plain.size()), rec.origin);
    return;
  }
  ++nodes_[n].stats.forwarded;
  CpuJob job;
  job.tx = true;
  job.data = plain;
  job.next = next_hop_[n];
  job.packet = held;
  held = -1;
  cpu_enqueue(n, std::move(job));
}

void Simulator::on_wake(NodeId n, std::int64_t k) {
  Node& nd = nodes_[n];
  const double base = static_cast<double>(k) * nd.duty.period;
  nd.window = true;
  push(base + nd.duty.tau, n, Ev::active_end, nd.epoch, k);
  push(static_cast<double>(k + 1) * nd.duty.period, n, Ev::wake, nd.epoch, k + 1);
  touch(n);
  mac_kick(n);
}

void Simulator::on_traffic(NodeId n, std::int64_t k) {
  Node& nd = nodes_[n];
  push(nd.traffic_phase + static_cast<double>(k + 1) / nd.traffic_rate, n, Ev::traffic, 0, k + 1);
  if (!nd.alive) return;
  AppPayload ap{n, nd.app_seq++, now_};
  const PacketKey key = (static_cast<PacketKey>(n) << 32) | ap.seq;
  packets_[key] = PacketRec{n, 1, false, false};
  ++nd.stats.generated;
  log(n, TraceEvent::generate, kNoNode, static_cast<std::uint32_t>(s_.payload_len), n);
  CpuJob job;
  job.tx = true;
  job.data = ap.encode(s_.payload_len);
  job.next = next_hop_[n];
  job.packet = key;
  cpu_enqueue(n, std::move(job));
}

void Simulator::deplete(NodeId n) {
  Node& nd = nodes_[n];
  account(nd);
  nd.stats.consumed_total_mas += nd.usable_mas - nd.stats.consumed_mas;
  nd.stats.consumed_mas = nd.usable_mas;
  if (nd.tx_now) finish_tx(nd.tx_id, true);
  nd.alive = false;
  nd.stats.depleted_at = now_;
  log(n, TraceEvent::depleted);
  nd.locked = -1;
  for (auto& f : nd.queue) release(n, f.packet);
  for (auto& j : nd.jobs) release(n, j.packet);
  nd.queue.clear();
  nd.jobs.clear();
  nd.mac_busy = nd.tx_now = nd.cpu_busy = nd.awaiting_ack = nd.window = false;
  nd.ack_pending = 0;
  ++nd.epoch;
  ++nd.mac_token;
  refresh(n);
  if (s_.reboot_delay >= 0) push(now_ + s_.reboot_delay, n, Ev::reboot);
}

void Simulator::reboot(NodeId n) {
  Node& nd = nodes_[n];
  const auto& cm = s_.countermeasures;
  account(nd);
  nd.stats.consumed_mas = 0.0;
  nd.alive = true;
  ++nd.stats.reboots;
  log(n, TraceEvent::reboot);
  if (!cm.flash_counters) {
    acl_reset_on_reboot(nd.acl, cm.persistent_blacklist);
    nd.out_counter = 1;
  }
  if (!cm.persistent_blacklist) blacklist_reset_on_reboot(nd.blacklist);
  nd.challenges.clear();
  nd.verified.clear();
  nd.need_verify = cm.challenge;
  if (cm.rekey) {
    for (NodeId peer : comm_nbr_[n]) {
      if (!is_node(peer)) continue;
      Key& k = key(n, peer);
      k = derive_next_key(k, static_cast<std::uint32_t>(nd.stats.reboots));
      if (AclEntry* e = nd.acl.find(node_address(peer))) e->key = k;
      if (AclEntry* e = nodes_[peer].acl.find(node_address(n))) {
        e->key = k;
        e->highest_counter = 0;
      }
    }
  }
  if (!nd.always_on) {
    const auto k = static_cast<std::int64_t>(std::ceil(now_ / nd.duty.period - 1e-12));
    push(static_cast<double>(k) * nd.duty.period, n, Ev::wake, nd.epoch, k);
  }
  touch(n);
  if (!s_.replay) return;
  for (std::size_t a = 0; a < attackers_.size(); ++a) {
    Attacker& at = attackers_[a];
    if (std::find(at.cfg.targets.begin(), at.cfg.targets.end(), n) == at.cfg.targets.end()) continue;
    std::vector<CapturedFrame> to_victim;
    for (const auto& c : at.captures)
      if (c.destination == static_cast<ShortAddress>(n)) to_victim.push_back(c);
    at.replay = capture_and_replay(to_victim, now_ + s_.replay_delay, s_.replay_spacing);
    for (std::size_t i = 0; i < at.replay.size(); ++i)
      push(at.replay[i].time, at.entity, Ev::replay, 0, static_cast<std::int64_t>(i));
  }
}

void Simulator::on_attack(std::size_t idx) {
  Attacker& a = attackers_[idx];
  if (a.stopped) return;
  if (s_.attacker_stop_on_depletion &&
      std::all_of(a.cfg.targets.begin(), a.cfg.targets.end(), [&](NodeId t) { return !nodes_[t].alive; })) {
    a.stopped = true;
    return;
  }
  const double next = a.clock.next();
  if (next >= 0) push(next, a.entity, Ev::attack);
  if (a.tx_now || (!a.cfg.blind && a.interferers > 0)) return;
  const NodeId target = a.cfg.targets[a.rr++ % a.cfg.targets.size()];
  ExtAddress spoof = a.cfg.spoof_source;
  if (spoof == 0) {
    NodeId parent = next_hop_[target];
    if (parent == kNoNode)
      for (NodeId c : comm_nbr_[target])
        if (is_node(c)) {
          parent = c;
          break;
        }
    spoof = node_address(parent == kNoNode ? target : parent);
  }
  auto& obs = a.observed[spoof];
  const SecuredFrame f = craft_bogus_frame(spoof, static_cast<ShortAddress>(target), obs, a.cfg.counter_strategy,
                                           a.cfg.level, a.cfg.payload_len, a.rng, a.seq++);
  obs = f.frame_counter();
  ++a.fired;
  Tx tx;
  tx.wire = encode_frame(f);
  tx.air = tx.wire.size() + kPhyHeaderLength;
  tx.seq = f.header.sequence;
  tx.counter = f.frame_counter();
  tx.dst_short = static_cast<std::uint16_t>(target);
  a.tx_now = true;
  start_tx(a.entity, std::move(tx));
}

void Simulator::on_replay(std::size_t idx, std::int64_t i) {
  Attacker& a = attackers_[idx];
  if (a.tx_now) {
    push(now_ + s_.csma.slot, a.entity, Ev::replay, 0, i);
    return;
  }
  const auto& raw = a.replay.at(static_cast<std::size_t>(i)).raw;
  const SecuredFrame f = decode_frame(raw);
  Tx tx;
  tx.wire = raw;
  tx.air = raw.size() + kPhyHeaderLength;
  tx.seq = f.header.sequence;
  tx.counter = f.frame_counter();
  tx.ack_request = f.header.ack_request;
  tx.dst_short = f.header.destination;
  a.tx_now = true;
  start_tx(a.entity, std::move(tx));
}

bool Simulator::watched_all_down() const {
  return std::all_of(watch_.begin(), watch_.end(), [&](NodeId n) { return !nodes_[n].alive; });
}

bool same(double a, double b) { return std::fabs(a - b) <= 1e-9 * std::max(std::fabs(a), std::fabs(b)) + 1e-15; }

NodeStats stats_diff(const NodeStats& a, const NodeStats& b) {
  NodeStats d;
  d.generated = a.generated - b.generated;
  d.delivered = a.delivered - b.delivered;
  d.dropped = a.dropped - b.dropped;
  d.tx_frames = a.tx_frames - b.tx_frames;
  d.rx_ok = a.rx_ok - b.rx_ok;
  d.rx_collision = a.rx_collision - b.rx_collision;
  d.crypto_ops = a.crypto_ops - b.crypto_ops;
  d.integrity_fail = a.integrity_fail - b.integrity_fail;
  d.replay_reject = a.replay_reject - b.replay_reject;
  d.unauth_accept = a.unauth_accept - b.unauth_accept;
  d.blacklisted_rx = a.blacklisted_rx - b.blacklisted_rx;
  d.forwarded = a.forwarded - b.forwarded;
  d.reboots = a.reboots - b.reboots;
  d.consumed_mas = a.consumed_mas - b.consumed_mas;
  d.consumed_total_mas = a.consumed_total_mas - b.consumed_total_mas;
  for (int i = 0; i < 3; ++i) d.radio_time[i] = a.radio_time[i] - b.radio_time[i];
  for (int i = 0; i < 4; ++i) d.cpu_time[i] = a.cpu_time[i] - b.cpu_time[i];
  return d;
}

bool stats_equal(const NodeStats& a, const NodeStats& b) {
  if (a.generated != b.generated || a.delivered != b.delivered || a.dropped != b.dropped ||
      a.tx_frames != b.tx_frames || a.rx_ok != b.rx_ok || a.rx_collision != b.rx_collision ||
      a.crypto_ops != b.crypto_ops || a.integrity_fail != b.integrity_fail || a.replay_reject != b.replay_reject ||
      a.unauth_accept != b.unauth_accept || a.blacklisted_rx != b.blacklisted_rx || a.forwarded != b.forwarded ||
      a.reboots != b.reboots)
    return false;
  if (!same(a.consumed_mas, b.consumed_mas)) return false;
  for (int i = 0; i < 3; ++i)
    if (!same(a.radio_time[i], b.radio_time[i])) return false;
  for (int i = 0; i < 4; ++i)
    if (!same(a.cpu_time[i], b.cpu_time[i])) return false;
  return true;
}

void stats_add_scaled(NodeStats& s, const NodeStats& d, std::int64_t n) {
  const auto m = static_cast<double>(n);
  s.generated += n * d.generated;
  s.delivered += n * d.delivered;
  s.dropped += n * d.dropped;
  s.tx_frames += n * d.tx_frames;
  s.rx_ok += n * d.rx_ok;
  s.rx_collision += n * d.rx_collision;
  s.crypto_ops += n * d.crypto_ops;
  s.integrity_fail += n * d.integrity_fail;
  s.replay_reject += n * d.replay_reject;
  s.unauth_accept += n * d.unauth_accept;
  s.blacklisted_rx += n * d.blacklisted_rx;
  s.forwarded += n * d.forwarded;
  s.consumed_mas += m * d.consumed_mas;
  s.consumed_total_mas += m * d.consumed_total_mas;
  for (int i = 0; i < 3; ++i) s.radio_time[i] += m * d.radio_time[i];
  for (int i = 0; i < 4; ++i) s.cpu_time[i] += m * d.cpu_time[i];
}

void Simulator::fast_forward_check() {
  for (auto& nd : nodes_) account(nd);
  Snapshot snap;
  for (const auto& nd : nodes_) snap.stats.push_back(nd.stats);
  snap.events = events_;
  snap.trace_size = res_.trace.size();
  for (const auto& a : attackers_) {
    snap.fired.push_back(a.fired);
    snap.observed.push_back(a.observed);
  }
  snaps_.push_back(std::move(snap));
  if (snaps_.size() > 4) snaps_.pop_front();

  auto schedule_next = [&] { push(now_ + hyper_, kSystem, Ev::ff_check); };
  if (snaps_.size() < 4 || !packets_.empty() || !txs_.empty()) {
    // Packet traffic rides on random backoffs and never repeats exactly.
    schedule_next();
    return;
  }
  const auto& s0 = snaps_[0];
  const auto& s1 = snaps_[1];
  const auto& s2 = snaps_[2];
  const auto& s3 = snaps_[3];
  const std::uint64_t ev = s3.events - s2.events;
  const std::size_t tr = s3.trace_size - s2.trace_size;
  bool steady = ev == s2.events - s1.events && ev == s1.events - s0.events && tr == s2.trace_size - s1.trace_size &&
                tr == s1.trace_size - s0.trace_size;
  for (std::size_t a = 0; a < attackers_.size() && steady; ++a)
    steady = s3.fired[a] - s2.fired[a] == s2.fired[a] - s1.fired[a] && s2.fired[a] - s1.fired[a] == s1.fired[a] - s0.fired[a];
  std::vector<NodeStats> delta;
  for (std::size_t n = 0; n < nodes_.size() && steady; ++n) {
    if (!nodes_[n].alive || nodes_[n].stats.reboots) steady = false;
    const NodeStats d3 = stats_diff(s3.stats[n], s2.stats[n]);
    steady = steady && stats_equal(d3, stats_diff(s2.stats[n], s1.stats[n])) &&
             stats_equal(d3, stats_diff(s1.stats[n], s0.stats[n]));
    delta.push_back(d3);
  }
  if (!steady) {
    schedule_next();
    return;
  }

  double cap = std::floor((s_.sim_end - now_) / hyper_) - 2;
  for (const auto& a : attackers_) {
    if (a.cfg.start > now_) cap = std::min(cap, std::floor((a.cfg.start - now_) / hyper_) - 2);
    if (a.cfg.stop < 1e299) cap = std::min(cap, std::floor((a.cfg.stop - now_) / hyper_) - 2);
  }
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    const Node& nd = nodes_[n];
    if (nd.gateway || !(delta[n].consumed_mas > 0)) continue;
    cap = std::min(cap, std::floor((nd.usable_mas - nd.stats.consumed_mas) / delta[n].consumed_mas) - 2);
  }
  if (!(cap >= 1) || !std::isfinite(cap)) {
    schedule_next();
    return;
  }
  const auto periods = static_cast<std::int64_t>(cap);
  const double shift = static_cast<double>(periods) * hyper_;

  for (auto& e : heap_) {
    e.t += shift;
    if (e.kind == Ev::wake || e.kind == Ev::active_end) {
      e.arg += std::llround(shift / nodes_[e.node].duty.period);
    } else if (e.kind == Ev::traffic) {
      e.arg += std::llround(shift * nodes_[e.node].traffic_rate);
    }
  }
  for (std::size_t a = 0; a < attackers_.size(); ++a) {
    Attacker& at = attackers_[a];
    const std::uint64_t per = s3.fired[a] - s2.fired[a];
    at.fired += per * static_cast<std::uint64_t>(periods);
    at.rr += per * static_cast<std::size_t>(periods);
    at.clock.skip(per * static_cast<std::uint64_t>(periods), shift);
    for (auto& [src, c] : at.observed) {
      const auto prev = s2.observed[a].count(src) ? s2.observed[a].at(src) : 0u;
      const std::uint64_t step = c >= prev ? c - prev : 0;
      c = static_cast<std::uint32_t>(std::min<std::uint64_t>(c + step * periods, kFixedLargeCounter));
    }
  }
  now_ += shift;
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    Node& nd = nodes_[n];
    stats_add_scaled(nd.stats, delta[n], periods);
    nd.last_t = now_;
    reschedule_depletion(nd);
    if (s_.record_ledger) {
      const double v = s_.power.voltage * 1e-3;
      res_.ledger.push_back({now_, nd.id, "fast_forward", nd.current,
                             (nd.stats.consumed_total_mas - nd.ledger_mark) * v,
                             std::max(0.0, nd.capacity_mas - nd.stats.consumed_mas) / 3.6e6});
      nd.ledger_mark = nd.stats.consumed_total_mas;
    }
  }
  res_.skipped_periods += static_cast<std::uint64_t>(periods);
  log(kNoNode, TraceEvent::fast_forward, kNoNode, 0, periods);
  snaps_.clear();
  schedule_next();
}

SimResult Simulator::run() {
  const int n = node_count();
  bool stop = false;
  while (!stop) {
    const double te = heap_.empty() ? kInf : heap_.front().t;
    const double td = depletions_.empty() ? kInf : depletions_.begin()->first;
    if (std::min(te, td) > s_.sim_end) break;
    if (td <= te) {
      const NodeId victim = depletions_.begin()->second;
      now_ = td;
      deplete(victim);
    } else {
      std::pop_heap(heap_.begin(), heap_.end(), Later{});
      const Event e = heap_.back();
      heap_.pop_back();
      now_ = e.t;
      if (e.kind != Ev::ff_check) ++events_;
      const bool node_event = is_node(e.node);
      if (node_event && !nodes_[e.node].alive && e.kind != Ev::reboot && e.kind != Ev::traffic) {
        // Dead nodes only keep their traffic clock and reboot timer.
      } else {
        switch (e.kind) {
          case Ev::tx_end:
            finish_tx(e.arg, false);
            break;
          case Ev::ack_timeout:
            if (e.token == nodes_[e.node].mac_token && nodes_[e.node].awaiting_ack) on_ack_timeout(e.node);
            break;
          case Ev::cpu_done:
            if (e.token == nodes_[e.node].epoch) on_cpu_done(e.node);
            break;
          case Ev::backoff_end:
            if (e.token == nodes_[e.node].mac_token) on_backoff_end(e.node);
            break;
          case Ev::tx_start:
            if (e.token == nodes_[e.node].mac_token) on_tx_start(e.node);
            break;
          case Ev::ack_start: {
            Node& nd = nodes_[e.node];
            if (e.token != nd.epoch) break;
            --nd.ack_pending;
            touch(e.node);
            if (nd.tx_now) break;
            Tx tx;
            tx.is_ack = true;
            tx.air = kAckAirBytes;
            tx.seq = static_cast<std::uint8_t>(e.arg & 0xff);
            tx.ack_target = static_cast<NodeId>(e.arg >> 8);
            nd.tx_id = start_tx(e.node, std::move(tx));
            nd.tx_now = true;
            nd.locked = -1;
            break;
          }
          case Ev::wake:
            if (e.token == nodes_[e.node].epoch) on_wake(e.node, e.arg);
            break;
          case Ev::active_end:
            if (e.token == nodes_[e.node].epoch) {
              nodes_[e.node].window = false;
              touch(e.node);
            }
            break;
          case Ev::traffic:
            on_traffic(e.node, e.arg);
            break;
          case Ev::attack:
            on_attack(static_cast<std::size_t>(e.node - n));
            break;
          case Ev::replay:
            on_replay(static_cast<std::size_t>(e.node - n), e.arg);
            break;
          case Ev::reboot:
            reboot(e.node);
            break;
          case Ev::ff_check:
            fast_forward_check();
            break;
        }
      }
    }
    flush_dirty();
    if (s_.stop_when_depleted && watched_all_down() && s_.reboot_delay < 0) stop = true;
  }
  if (!stop) now_ = std::max(now_, s_.sim_end);
  for (auto& nd : nodes_) account(nd);
  res_.end_time = now_;
  res_.events = events_;
  res_.next_hop = next_hop_;
  for (NodeId i = 0; i < n; ++i) res_.nodes[i] = nodes_[i].stats;
  return std::move(res_);
}

}  // namespace

SimResult simulate(const Scenario& scenario, std::uint64_t seed) { return Simulator(scenario, seed).run(); }

}  // namespace zigdrain
