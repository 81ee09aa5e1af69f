#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "zigdrain/attacks.hpp"
#include "zigdrain/scenario.hpp"
#include "zigdrain/trace.hpp"

namespace zigdrain {

enum class RadioState : std::uint8_t { off, rx, tx };
enum class CpuState : std::uint8_t { off, powersave, idle, active };

/// Awake during [phase + kT, phase + kT + tau).
bool duty_awake(const DutyCycle& duty, double t, double phase = 0.0);

ExtAddress node_address(NodeId id);

/// Pairwise link key shared by a and b for a given run seed.
Key link_key(std::uint64_t seed, NodeId a, NodeId b);

struct CsmaState {
  int nb = 0;  // backoffs in this attempt
  int be = 3;
  int retries = 0;
};

enum class CsmaAction { backoff, transmit, drop };

CsmaState csma_begin(const CsmaParams& p);
int csma_backoff_slots(const CsmaState& s, std::mt19937_64& rng);
CsmaAction csma_after_cca(CsmaState& s, const CsmaParams& p, bool busy);
/// No ACK arrived: start a fresh channel access or give up.
CsmaAction csma_after_no_ack(CsmaState& s, const CsmaParams& p);

struct Transmission {
  NodeId sender = kNoNode;
  double start = 0.0;
  double end = 0.0;
};

struct Reception {
  std::size_t tx = 0;
  NodeId receiver = kNoNode;
  bool decoded = false;
};

/// Batch form of the channel rule the simulator applies incrementally. A listener
/// in comm range decodes a frame iff no other overlapping transmission reaches it
/// within the interference range and it is not transmitting itself.
std::vector<Reception> channel_resolve(const std::vector<Transmission>& txs, const std::vector<Position>& positions,
                                       double comm_range, double interference_range,
                                       const std::vector<NodeId>& listeners);

struct NodeStats {
  std::int64_t generated = 0;
  std::int64_t delivered = 0;  // origin-attributed, at the gateway
  std::int64_t dropped = 0;    // origin-attributed
  std::int64_t tx_frames = 0;
  std::int64_t rx_ok = 0;
  std::int64_t rx_collision = 0;
  std::int64_t crypto_ops = 0;  // frames that went through decryption/verification
  std::int64_t integrity_fail = 0;
  std::int64_t replay_reject = 0;
  std::int64_t unauth_accept = 0;
  std::int64_t blacklisted_rx = 0;
  std::int64_t forwarded = 0;
  std::int64_t reboots = 0;
  double depleted_at = -1.0;
  double consumed_mas = 0.0;        // since the last refill
  double consumed_total_mas = 0.0;  // over the whole run
  std::array<double, 3> radio_time{};
  std::array<double, 4> cpu_time{};
};

struct SimResult {
  TraceLog trace;
  std::vector<NodeStats> nodes;
  std::vector<LedgerRecord> ledger;
  std::vector<NodeId> next_hop;
  std::vector<CapturedFrame> captures;  // everything the attackers overheard to or from a target
  double end_time = 0.0;
  std::uint64_t events = 0;
  std::uint64_t skipped_periods = 0;
  double skip_period = 0.0;  // fast-forward hyperperiod, 0 when disabled

  /// Remaining charge in Ah for node n.
  double remaining_ah(const Scenario& s, NodeId n) const;
};

/// Runs one scenario. Identical (scenario, seed) give bit-identical traces.
SimResult simulate(const Scenario& scenario, std::uint64_t seed);

/// Charge implied by the per-state time accumulators, in mA*s.
double ledger_charge(const NodeStats& stats, const PowerProfile& power);

/// Fast-forward hyperperiod in seconds for the scenario, 0 if it has none.
double hyperperiod(const Scenario& scenario);

/// Application payload carried by every legitimate data frame.
struct AppPayload {
  NodeId origin = kNoNode;
  std::uint32_t seq = 0;
  double generated_at = 0.0;

  static constexpr std::uint16_t kMagic = 0x5a17;
  static constexpr std::size_t kHeaderLength = 16;

  Bytes encode(std::size_t length) const;
  /// Empty optional-like result: origin == kNoNode when the bytes are not a payload.
  static AppPayload decode(ByteView bytes);
};

}  // namespace zigdrain
