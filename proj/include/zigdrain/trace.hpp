#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "zigdrain/types.hpp"

namespace zigdrain {

enum class TraceEvent : std::uint8_t {
  generate,
  tx_start,
  tx_end,
  rx_ok,
  rx_collision,
  rx_replay_reject,
  rx_integrity_fail,
  rx_unauth_accept,
  rx_blacklisted,
  decrypt_start,
  decrypt_end,
  deliver,
  drop,
  sleep,
  wake,
  depleted,
  reboot,
  blacklist_add,
  challenge_issue,
  challenge_ok,
  challenge_fail,
  fast_forward,
};

std::string_view to_string(TraceEvent e);
TraceEvent trace_event_from(std::string_view name);

/// `detail` is event specific: origin node for generate/deliver/drop, frame
/// counter for rx outcomes, skipped periods for fast_forward.
struct TraceRecord {
  double time = 0.0;
  NodeId node = kNoNode;
  TraceEvent event = TraceEvent::tx_start;
  NodeId counterpart = kNoNode;
  std::uint32_t bytes = 0;
  std::int64_t detail = 0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

class TraceLog {
 public:
  void add(const TraceRecord& r) { records_.push_back(r); }
  const std::vector<TraceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t count(TraceEvent e, NodeId node = kNoNode) const;

  /// FNV-1a over every field of every record.
  std::uint64_t hash() const;

  void write_csv(std::ostream& os) const;
  static TraceLog read_csv(std::istream& is);

 private:
  std::vector<TraceRecord> records_;
};

inline constexpr std::string_view kTraceCsvHeader = "time_s,node,event,counterpart,bytes,detail";

/// Packets/s delivered at `gateway`, attributed to the originating node, per window.
/// Result is [node][window]; windows cover [t0, t1).
std::vector<std::vector<double>> throughput_series(const TraceLog& trace, std::size_t node_count, NodeId gateway,
                                                   double window, double t0, double t1);

/// Mean delivered packets/s per origin over [t0, t1).
std::vector<double> mean_throughput(const TraceLog& trace, std::size_t node_count, NodeId gateway, double t0,
                                    double t1);

struct LedgerRecord {
  double time = 0.0;
  NodeId node = kNoNode;
  std::string state;
  double current_ma = 0.0;
  double delta_j = 0.0;
  double remaining_ah = 0.0;
};

inline constexpr std::string_view kLedgerCsvHeader = "time_s,node_id,state,current_mA,delta_J,remaining_Ah";

void write_ledger_csv(std::ostream& os, const std::vector<LedgerRecord>& ledger);

}  // namespace zigdrain
