#include "zigdrain/trace.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

namespace zigdrain {

namespace {
constexpr std::array<std::string_view, 22> kNames = {
    "generate",        "tx_start",         "tx_end",        "rx_ok",          "rx_collision",
    "rx_replay_reject", "rx_integrity_fail", "rx_unauth_accept", "rx_blacklisted", "decrypt_start",
    "decrypt_end",     "deliver",          "drop",          "sleep",          "wake",
    "depleted",        "reboot",           "blacklist_add", "challenge_issue", "challenge_ok",
    "challenge_fail",  "fast_forward",
};

void fnv(std::uint64_t& h, const void* p, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ULL;
  }
}
}  // namespace

std::string_view to_string(TraceEvent e) { return kNames.at(static_cast<std::size_t>(e)); }

TraceEvent trace_event_from(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<TraceEvent>(i);
  throw Error("unknown trace event '" + std::string(name) + "'");
}

std::size_t TraceLog::count(TraceEvent e, NodeId node) const {
  std::size_t n = 0;
  for (const auto& r : records_)
    if (r.event == e && (node == kNoNode || r.node == node)) ++n;
  return n;
}

std::uint64_t TraceLog::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& r : records_) {
    fnv(h, &r.time, sizeof r.time);
    fnv(h, &r.node, sizeof r.node);
    fnv(h, &r.event, sizeof r.event);
    fnv(h, &r.counterpart, sizeof r.counterpart);
    fnv(h, &r.bytes, sizeof r.bytes);
    fnv(h, &r.detail, sizeof r.detail);
  }
  return h;
}

void TraceLog::write_csv(std::ostream& os) const {
  os << kTraceCsvHeader << '\n';
  char buf[64];
  for (const auto& r : records_) {
    std::snprintf(buf, sizeof buf, "%.9f", r.time);
    os << buf << ',' << r.node << ',' << to_string(r.event) << ',' << r.counterpart << ',' << r.bytes << ','
       << r.detail << '\n';
  }
}

TraceLog TraceLog::read_csv(std::istream& is) {
  TraceLog log;
  std::string line;
  if (!std::getline(is, line) || line.rfind("time_s,", 0) != 0) throw Error("trace CSV lacks its header row");
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[6];
    for (auto& s : f)
      if (!std::getline(ls, s, ',')) throw Error("trace CSV line " + std::to_string(lineno) + ": too few fields");
    TraceRecord r;
    try {
      r.time = std::stod(f[0]);
      r.node = std::stoi(f[1]);
      r.event = trace_event_from(f[2]);
      r.counterpart = std::stoi(f[3]);
      r.bytes = static_cast<std::uint32_t>(std::stoul(f[4]));
      r.detail = std::stoll(f[5]);
    } catch (const std::logic_error&) {
      throw Error("trace CSV line " + std::to_string(lineno) + ": malformed field");
    }
    log.add(r);
  }
  return log;
}

std::vector<std::vector<double>> throughput_series(const TraceLog& trace, std::size_t node_count, NodeId gateway,
                                                   double window, double t0, double t1) {
  if (!(window > 0)) throw Error("window must be positive");
  const auto windows = static_cast<std::size_t>(std::max(0.0, (t1 - t0) / window));
  std::vector<std::vector<double>> out(node_count, std::vector<double>(windows, 0.0));
  for (const auto& r : trace.records()) {
    if (r.event != TraceEvent::deliver || r.node != gateway || r.time < t0) continue;
    const auto w = static_cast<std::size_t>((r.time - t0) / window);
    if (w >= windows || r.detail < 0 || static_cast<std::size_t>(r.detail) >= node_count) continue;
    out[r.detail][w] += 1.0 / window;
  }
  return out;
}

std::vector<double> mean_throughput(const TraceLog& trace, std::size_t node_count, NodeId gateway, double t0,
                                    double t1) {
  std::vector<double> out(node_count, 0.0);
  if (!(t1 > t0)) return out;
  for (const auto& r : trace.records())
    if (r.event == TraceEvent::deliver && r.node == gateway && r.time >= t0 && r.time < t1 && r.detail >= 0 &&
        static_cast<std::size_t>(r.detail) < node_count)
      out[r.detail] += 1.0;
  for (auto& x : out) x /= (t1 - t0);
  return out;
}

void write_ledger_csv(std::ostream& os, const std::vector<LedgerRecord>& ledger) {
  os << kLedgerCsvHeader << '\n';
  char buf[192];
  for (const auto& r : ledger) {
    std::snprintf(buf, sizeof buf, "%.9f,%d,%s,%.6f,%.12e,%.12e\n", r.time, r.node, r.state.c_str(), r.current_ma,
                  r.delta_j, r.remaining_ah);
    os << buf;
  }
}

}  // namespace zigdrain
