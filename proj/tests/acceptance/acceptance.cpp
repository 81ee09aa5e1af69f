// One PASS/FAIL line per acceptance criterion; exit status 0 only if all pass.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "zigdrain/experiments.hpp"

using namespace zigdrain;

namespace {

const std::string kRoot = ZIGDRAIN_SOURCE_DIR;

Scenario shipped(const std::string& name) { return parse_scenario(kRoot + "/scenarios/" + name + ".yaml"); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::ostringstream why;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (!pass) why << "; ";
      why << what;
      pass = false;
    }
  }
};

std::string pct(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.2f%%", 100 * x);
  return b;
}

Verdict lifetime_reproduction() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = lifetime(shipped("sec6_victim"), 1);
  const double wall = seconds_since(t0);
  auto family_ok = [&](std::initializer_list<int> levels, double target) {
    for (const auto& r : rows)
      if (std::find(levels.begin(), levels.end(), r.level) != levels.end())
        v.require(std::abs(r.ratio_analytic - target) <= 0.005,
                  r.suite + " model " + pct(r.ratio_analytic) + " vs " + pct(target));
  };
  v.require(rows.size() == 7, "expected seven secured levels");
  for (const auto& r : rows)
    v.require(std::abs(r.ratio_sim - r.ratio_analytic) <= 0.015,
              r.suite + " sim " + pct(r.ratio_sim) + " vs model " + pct(r.ratio_analytic));
  family_ok({4}, 0.109);
  family_ok({1, 2, 3}, 0.068);
  family_ok({5, 6, 7}, 0.065);
  v.require(wall <= 60, "runtime " + std::to_string(wall) + " s");
  if (v.pass) {
    for (const auto& r : rows)
      if (r.level == 4 || r.level == 3 || r.level == 7)
        v.why << r.suite << " " << pct(r.ratio_sim) << " (model " << pct(r.ratio_analytic) << ") ";
    v.why << "in " << wall << " s";
  }
  return v;
}

Verdict per_packet_cost_structure() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = per_packet_cost(shipped("sec6_victim"), 1);
  const double wall = seconds_since(t0);
  auto find = [&](int level, std::size_t len) -> const CostRow* {
    for (const auto& r : rows)
      if (r.level == level && r.payload == len) return &r;
    return nullptr;
  };
  std::size_t compared = 0;
  for (std::size_t len = 10; len <= 100; len += 10) {
    for (int mic = 1; mic <= 3; ++mic) {
      const CostRow* ctr = find(4, len);
      const CostRow* cbc = find(mic, len);
      const CostRow* ccm = find(mic + 4, len);
      if (!ctr || !cbc || !ccm) continue;  // frame too long at this MIC length
      ++compared;
      v.require(ctr->t_dec_measured < cbc->t_dec_measured && cbc->t_dec_measured < ccm->t_dec_measured,
                "ordering broken at " + std::to_string(len) + " B, MIC level " + std::to_string(mic));
    }
  }
  v.require(compared >= 25, "too few comparable rows");
  const CostRow* a = find(5, 20);
  const CostRow* b = find(5, 30);
  v.require(a && b && a->t_dec_measured == b->t_dec_measured, "CCM-32 cost differs between 20 and 30 B");
  const CostRow* c = find(5, 60);
  v.require(c && c->cpu_share > 0.85, "CPU share at 60 B CCM-32 too low");
  v.require(wall <= 10, "runtime " + std::to_string(wall) + " s");
  if (v.pass) v.why << compared << " comparisons, CPU share " << pct(c->cpu_share) << ", " << wall << " s";
  return v;
}

Verdict depletion_count() {
  Verdict v;
  const auto rows = lifetime(shipped("sec6_victim"), 1);
  for (const auto& r : rows) {
    const double model_j = static_cast<double>(r.messages_model) * r.e_msg_j;
    v.require(std::abs(model_j - r.drained_j) <= r.e_cycle_j,
              r.suite + ": m*e_p " + std::to_string(model_j) + " J vs drained " + std::to_string(r.drained_j) + " J");
    v.require(std::llabs(r.messages_model - r.messages_sim) <= std::max<std::int64_t>(1, r.n_p),
              r.suite + ": " + std::to_string(r.messages_model) + " predicted vs " + std::to_string(r.messages_sim) +
                  " simulated messages");
  }
  if (v.pass && !rows.empty())
    v.why << rows.back().suite << " predicts " << rows.back().messages_model << " messages, simulated "
          << rows.back().messages_sim;
  return v;
}

Verdict analytic_model() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const auto cases = analytic_sweep(shipped("fig1_chain"));
  const double wall = seconds_since(t0);
  v.require(cases.size() == 2, "expected two attack cases");
  const double golden_s[6] = {0, 0.00397487736209, 0.0062155177654, 0.0109880931784, 0.0188444578618,
                              0.0191504569362};
  for (const auto& c : cases) {
    const auto& sw = c.sweep;
    v.require(sw.grid.size() == 11, "grid must have 11 points");
    for (const auto& pt : sw.points) v.require(pt.residual < 1e-9, "residual above 1e-9");
    for (int n = 1; n <= 5; ++n)
      v.require(std::abs(sw.points.front().nodes[n].S - golden_s[n]) < 1e-9, "baseline S drifted from golden");
    for (std::size_t k = 1; k < sw.points.size(); ++k) {
      for (NodeId n : c.interfered)
        v.require(sw.points[k].nodes[n].S <= sw.points[k - 1].nodes[n].S + 1e-15, "interfered S increased");
      if (c.id == 1)
        v.require(sw.delta_pct[k][1] < sw.delta_pct[k][2], "case 1: S1 does not decline faster than S2");
      if (c.id == 2)
        v.require(sw.points[k].nodes[5].S >= sw.points[k - 1].nodes[5].S - 1e-15, "case 2: S5 decreased");
    }
  }
  v.require(wall <= 5, "runtime " + std::to_string(wall) + " s");
  if (v.pass) v.why << "22 solves, " << wall << " s";
  return v;
}

Verdict localization_error() {
  Verdict v;
  const auto runs = localization(shipped("sec6_dos38"), 1);
  v.require(runs.size() == 4, "expected four placements");
  double total = 0;
  for (const auto& r : runs) {
    v.require(r.located, "placement not located");
    v.require(r.wall_s <= 120, "run took " + std::to_string(r.wall_s) + " s");
    total += r.located ? r.error : 1e9;
  }
  const double mean = total / static_cast<double>(runs.size());
  v.require(mean <= 30, "mean error " + std::to_string(mean) + " m");
  if (v.pass) v.why << "mean error " << mean << " m";
  return v;
}

Verdict blacklist_ab() {
  Verdict v;
  const auto r = countermeasure_ab(shipped("sec6_dos38"), 1);
  v.require(r.blacklist_time >= 0, "victim never blacklisted the attacker");
  v.require(r.recovery >= 0.9, "throughput recovered to " + pct(r.recovery));
  v.require(r.blacklist_drain_ma > r.baseline_drain_ma, "drain not above baseline");
  if (v.pass)
    v.why << "recovery " << pct(r.recovery) << ", drain " << r.blacklist_drain_ma << " mA vs " << r.baseline_drain_ma
          << " mA";
  return v;
}

Verdict replay() {
  Verdict v;
  const auto r = replay_demo(shipped("replay_demo"), 1);
  v.require(r.size() == 2, "expected two variants");
  v.require(r[0].first_reboot >= 0, "victim never rebooted");
  v.require(r[0].accepted_after_reboot > 0, "no replay accepted without countermeasures");
  v.require(r[1].accepted_after_reboot == 0, "replay accepted with challenge + rekey");
  if (v.pass)
    v.why << r[0].accepted_after_reboot << " replays accepted undefended, " << r[1].accepted_after_reboot
          << " defended";
  return v;
}

Verdict nonce_reuse() {
  Verdict v;
  const auto r = nonce_reuse_demo(shipped("replay_demo"), 1);
  v.require(r.found, "no counter reuse captured");
  v.require(r.exact, "recovered xor differs");
  v.require(!r.recovered.empty(), "empty recovery");
  if (v.pass) v.why << r.recovered.size() << " bytes recovered exactly for counter " << r.counter;
  return v;
}

Key random_key(std::mt19937_64& rng) {
  Key k{};
  for (auto& b : k) b = static_cast<std::uint8_t>(rng());
  return k;
}

Verdict property_suites() {
  Verdict v;
  std::mt19937_64 rng(20240601);

  // Crypto: roundtrip, tamper, replay monotonicity.
  for (int i = 0; i < 400; ++i) {
    const auto level = static_cast<SecurityLevel>(1 + rng() % 7);
    const std::size_t len = rng() % (kMaxMacFrameLength - kMacHeaderLength - 5 - kFcsLength - mic_length(level) + 1);
    Bytes payload(len);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    const Key key = random_key(rng);
    MacHeader h;
    h.source = rng();
    h.destination = static_cast<ShortAddress>(rng());
    const auto counter = static_cast<std::uint32_t>(1 + rng() % 1000000);
    const SecuredFrame f = decode_frame(encode_frame(secure_frame(key, h, payload, level, counter)));
    AclEntry acl{h.source, key, counter - 1, false};
    const auto ok = unsecure_frame(acl, f);
    v.require(ok.status == SecurityStatus::ok && ok.payload == payload, "crypto roundtrip");
    v.require(acl.highest_counter == counter, "high-water mark not advanced");
    v.require(unsecure_frame(acl, f).status == SecurityStatus::replay_rejected, "replay accepted");
    if (has_integrity(level) && (len > 0 || !f.mic.empty())) {
      SecuredFrame t = f;
      if (len > 0)
        t.payload[rng() % len] ^= static_cast<std::uint8_t>(1 + rng() % 255);
      else
        t.mic[0] ^= 1;
      AclEntry fresh{h.source, key, 0, false};
      v.require(unsecure_frame(fresh, t).status == SecurityStatus::integrity_failure, "tamper undetected");
      v.require(fresh.highest_counter == 0, "failed frame moved the high-water mark");
    }
  }

  // Simulator: ledger closure and determinism on random small networks.
  for (int i = 0; i < 6; ++i) {
    std::ostringstream y;
    y << "sim_end: 15\nmeasure_start: 0\ntopology:\n  gateway: 0\n  nodes: [[0, 0]";
    const int n = 3 + static_cast<int>(rng() % 5);
    for (int k = 1; k < n; ++k) y << ", [" << (k * 18) << ", " << (rng() % 15) << "]";
    y << "]\nnodes:\n  always_on: " << (i % 2 ? "true" : "false") << "\n  duty: {tau: 0.02, period: 0.1}\n"
      << "  traffic_rate: " << (1 + rng() % 3) << "\n  level: " << (1 + rng() % 7) << "\n"
      << "attackers:\n  - {position: [20, 12], targets: [1], rate_model: poisson, mean_interval: 0.05}\n";
    std::string text = y.str();
    text.replace(text.find("measure_start: 0\n"), 17, "");
    text += "experiment: {measure_start: 0}\n";
    const Scenario s = parse_scenario_text(text);
    const std::uint64_t seed = rng();
    const auto a = simulate(s, seed);
    const auto b = simulate(s, seed);
    v.require(a.trace.hash() == b.trace.hash(), "simulation not deterministic");
    for (const auto& st : a.nodes)
      v.require(std::abs(ledger_charge(st, s.power) - st.consumed_total_mas) <= 1e-9 * std::max(1.0, st.consumed_total_mas),
                "energy ledger does not close");
  }

  // Analytic model: residual and clamping.
  for (int i = 0; i < 60; ++i) {
    ChainSpec spec = fig1_chain(1 + static_cast<int>(rng() % 2));
    spec.p_att = std::uniform_real_distribution<double>(0, 0.5)(rng);
    spec.gen_rate = std::uniform_real_distribution<double>(0.001, 0.05)(rng);
    FixedPointResult r;
    try {
      r = solve_fixed_point(spec);
    } catch (const NoConvergence&) {
      v.require(false, "solver failed to converge");
      continue;
    }
    v.require(r.residual < 1e-9, "residual above tolerance");
    v.require(model_residual(spec, r.nodes) < 1e-9, "stored solution off the equations");
    for (std::size_t n = 1; n < r.nodes.size(); ++n) {
      const auto& x = r.nodes[n];
      v.require(x.alpha >= 0 && x.alpha <= 1 && x.tau >= 0 && x.tau <= 1 && x.p_s >= 0 && x.p_s <= 1 && x.S >= 0,
                "quantity outside its range");
    }
    for (NodeId c : r.clamped) v.require(r.nodes[c].alpha == 0.0 || r.nodes[c].alpha == 1.0, "clamp not applied");
  }

  // Localization: the estimate is a convex combination of the group.
  for (int i = 0; i < 500; ++i) {
    const std::size_t k = 1 + rng() % 6;
    std::vector<Position> pos;
    std::vector<NodeId> group;
    std::map<NodeId, double> delta;
    double minx = 1e9, maxx = -1e9, miny = 1e9, maxy = -1e9;
    for (std::size_t j = 0; j < k; ++j) {
      const Position p{std::uniform_real_distribution<double>(0, 100)(rng),
                       std::uniform_real_distribution<double>(0, 100)(rng)};
      pos.push_back(p);
      group.push_back(static_cast<NodeId>(j));
      delta[static_cast<NodeId>(j)] = -std::uniform_real_distribution<double>(1, 90)(rng);
      minx = std::min(minx, p.x);
      maxx = std::max(maxx, p.x);
      miny = std::min(miny, p.y);
      maxy = std::max(maxy, p.y);
    }
    const Position e = estimate_location(group, delta, pos);
    v.require(e.x >= minx - 1e-9 && e.x <= maxx + 1e-9 && e.y >= miny - 1e-9 && e.y <= maxy + 1e-9,
              "estimate outside the group hull");
    if (k == 1) v.require(e.x == pos[0].x && e.y == pos[0].y, "single-node estimate moved");
  }
  if (v.pass) v.why << "crypto, ledger, solver and centroid properties hold";
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"lifetime ratios", lifetime_reproduction},
      {"per-packet cost structure", per_packet_cost_structure},
      {"depletion count", depletion_count},
      {"analytic DoS model", analytic_model},
      {"localization error", localization_error},
      {"blacklisting A/B", blacklist_ab},
      {"replay after reboot", replay},
      {"nonce reuse", nonce_reuse},
      {"property suites", property_suites},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.require(false, std::string("exception: ") + e.what());
    }
    std::printf("%s %zu %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), v.why.str().c_str());
    std::fflush(stdout);
    if (!v.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
