#include "zigdrain/analytic_dos.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace zigdrain {

namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

bool contains(const std::vector<NodeId>& v, NodeId x) { return std::find(v.begin(), v.end(), x) != v.end(); }

struct State {
  std::vector<double> rho, p;
};

// One evaluation of every model equation at the given (rho, p).
struct Evaluation {
  std::vector<NodeSolution> nodes;
  std::vector<NodeId> clamped;
};

Evaluation evaluate(const ChainSpec& s, const State& st) {
  const auto n = static_cast<NodeId>(s.size());
  const double L = s.packet_slots;
  const double b_bar = (std::pow(2.0, s.mac_be) - 1.0) / 2.0;
  auto active = [&](NodeId j) { return j == s.gateway ? 0.0 : st.rho[j] * st.p[j]; };

  Evaluation ev;
  ev.nodes.assign(n, NodeSolution{});
  std::vector<double> ps(n, 0.0);

  for (NodeId i = 0; i < n; ++i) {
    if (i == s.gateway) continue;
    auto& out = ev.nodes[i];
    double idle = 1.0;
    for (NodeId j : s.neighbors[i]) idle *= 1.0 - active(j);
    if (s.interfered[i]) idle *= 1.0 - s.p_att;
    const double raw_alpha = 1.0 - L * (1.0 - idle);
    if (raw_alpha < 0.0 || raw_alpha > 1.0) ev.clamped.push_back(i);
    out.alpha = clamp01(raw_alpha);
    out.tau = 1.0 / (b_bar + 1.0 + L * out.alpha);

    // Success of a transmission from i to its next hop r.
    const NodeId r = s.next_hop[i];
    double success = 1.0;
    for (NodeId j : s.neighbors[i])
      if (j != r) success *= 1.0 - active(j);
    for (NodeId h : s.neighbors[r])
      if (h != i && !contains(s.neighbors[i], h)) success *= clamp01(1.0 - L * active(h));
    if (s.interfered[i])
      success *= 1.0 - s.p_att;
    else if (s.interfered[r])
      success *= clamp01(1.0 - L * s.p_att);
    success *= 1.0 - (r == s.gateway ? 0.0 : st.rho[r]);
    ps[i] = success;
    out.p_s = success;
  }

  for (NodeId i = 0; i < n; ++i) {
    if (i == s.gateway) continue;
    auto& out = ev.nodes[i];
    out.p = out.tau * out.alpha;
    double inbound = 0.0;
    for (NodeId c = 0; c < n; ++c)
      if (c != s.gateway && s.next_hop[c] == i) inbound += active(c) * ps[c];
    const double load = s.gen_rate + inbound;
    if (load <= 0.0)
      out.rho = 0.0;
    else
      out.rho = out.p > 0.0 ? std::min(load / out.p, 1.0) : 1.0;
  }

  // Own-packet throughput: lambda times the forwarded fraction at every hop.
  std::vector<double> forwarded(n, 0.0);
  for (NodeId i = 0; i < n; ++i) {
    if (i == s.gateway) continue;
    double inbound = 0.0;
    for (NodeId c = 0; c < n; ++c)
      if (c != s.gateway && s.next_hop[c] == i) inbound += active(c) * ps[c];
    const double load = s.gen_rate + inbound;
    forwarded[i] = load > 0.0 ? std::min(1.0, active(i) * ps[i] / load) : 0.0;
  }
  for (NodeId i = 0; i < n; ++i) {
    if (i == s.gateway) continue;
    double S = s.gen_rate;
    for (NodeId j = i; j != s.gateway; j = s.next_hop[j]) S *= forwarded[j];
    ev.nodes[i].S = S;
  }
  return ev;
}

struct Iterated {
  State state;
  double residual = 0;
  int iterations = 0;
};

Iterated iterate(const ChainSpec& s, State st, const SolverOptions& o) {
  const auto n = s.size();
  double residual = 0;
  for (int it = 1; it <= o.max_iterations; ++it) {
    const Evaluation ev = evaluate(s, st);
    residual = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<NodeId>(i) == s.gateway) continue;
      const double dr = ev.nodes[i].rho - st.rho[i];
      const double dp = ev.nodes[i].p - st.p[i];
      residual = std::max({residual, std::abs(dr), std::abs(dp)});
      st.rho[i] += (1.0 - o.damping) * dr;
      st.p[i] += (1.0 - o.damping) * dp;
    }
    if (residual < o.tolerance * 1e-2) return {st, residual, it};
  }
  throw NoConvergence(o.max_iterations, residual);
}

State state_of(const std::vector<NodeSolution>& nodes) {
  State st;
  for (const auto& x : nodes) {
    st.rho.push_back(x.rho);
    st.p.push_back(x.p);
  }
  return st;
}

}  // namespace

void ChainSpec::validate() const {
  const auto n = size();
  if (next_hop.size() != n || interfered.size() != n) throw Error("chain spec vectors differ in length");
  if (gateway < 0 || gateway >= static_cast<NodeId>(n)) throw Error("chain gateway out of range");
  if (gen_rate < 0 || gen_rate > 1) throw Error("gen_rate must be in [0,1]");
  if (p_att < 0 || p_att > 1) throw Error("p_att must be in [0,1]");
  if (packet_slots < 1) throw Error("packet length must be at least one slot");
  if (mac_be < 0 || mac_be > 8) throw Error("macBE out of range");
  for (NodeId i = 0; i < static_cast<NodeId>(n); ++i) {
    for (NodeId j : neighbors[i]) {
      if (j < 0 || j >= static_cast<NodeId>(n) || j == i) throw Error("bad neighbour id");
      if (!contains(neighbors[j], i)) throw Error("interference sets must be symmetric");
    }
    if (i == gateway) continue;
    const NodeId r = next_hop[i];
    if (r < 0 || r >= static_cast<NodeId>(n) || !contains(neighbors[i], r))
      throw Error("next hop of node " + std::to_string(i) + " is not a neighbour");
  }
  std::vector<NodeId> nh = next_hop;
  nh[gateway] = kNoNode;
  for (NodeId i = 0; i < static_cast<NodeId>(n); ++i) route_path(nh, i);
}

ChainSpec chain_from_topology(const Topology& topo, const std::vector<NodeId>& interfered) {
  ChainSpec s;
  s.gateway = topo.gateway;
  s.next_hop = shortest_path_routes(topo);
  for (NodeId i = 0; i < static_cast<NodeId>(topo.size()); ++i)
    s.neighbors.push_back(topo.interference_neighbors(i));
  s.interfered.assign(topo.size(), false);
  for (NodeId i : interfered) s.interfered.at(i) = true;
  return s;
}

Topology fig1_topology() {
  Topology t;
  t.positions = {{0, 0}, {100, 0}, {75, 0}, {50, 0}, {25, 0}, {10, 25}};
  t.comm_range = 30.0;
  t.interference_range = 30.0;
  t.gateway = 0;
  return t;
}

ChainSpec fig1_chain(int attack_case) {
  if (attack_case == 1) return chain_from_topology(fig1_topology(), {2, 3});
  if (attack_case == 2) return chain_from_topology(fig1_topology(), {3});
  throw Error("attack case must be 1 or 2");
}

NoConvergence::NoConvergence(int iterations, double residual)
    : Error("fixed point did not converge after " + std::to_string(iterations) +
            " iterations (residual " + std::to_string(residual) + ")"),
      residual_(residual) {}

FixedPointResult solve_fixed_point(const ChainSpec& spec, const SolverOptions& options) {
  spec.validate();
  const auto n = spec.size();
  const Iterated first = iterate(spec, State{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}, options);

  FixedPointResult r;
  const Evaluation ev = evaluate(spec, first.state);
  r.nodes = ev.nodes;
  r.clamped = ev.clamped;
  r.iterations = first.iterations;
  r.residual = model_residual(spec, r.nodes);
  if (r.residual >= options.tolerance) throw NoConvergence(first.iterations, r.residual);

  if (options.restart_check) {
    std::mt19937_64 rng(options.restart_seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    State st{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
      if (static_cast<NodeId>(i) == spec.gateway) continue;
      st.rho[i] = u(rng);
      st.p[i] = u(rng) * 0.2;
    }
    try {
      const Iterated second = iterate(spec, st, options);
      for (std::size_t i = 0; i < n; ++i)
        if (std::abs(second.state.rho[i] - first.state.rho[i]) > 1e-6 ||
            std::abs(second.state.p[i] - first.state.p[i]) > 1e-6)
          r.second_fixed_point = true;
    } catch (const NoConvergence&) {
    }
  }
  return r;
}

double model_residual(const ChainSpec& spec, const std::vector<NodeSolution>& nodes) {
  const Evaluation ev = evaluate(spec, state_of(nodes));
  double worst = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& a = nodes[i];
    const auto& b = ev.nodes[i];
    worst = std::max({worst, std::abs(a.tau - b.tau), std::abs(a.alpha - b.alpha), std::abs(a.rho - b.rho),
                      std::abs(a.p - b.p), std::abs(a.p_s - b.p_s), std::abs(a.S - b.S)});
  }
  return worst;
}

SweepResult sweep_attack_rate(const ChainSpec& spec, const std::vector<double>& grid,
                              const SolverOptions& options) {
  SweepResult out;
  out.grid = grid;
  ChainSpec base = spec;
  base.p_att = 0.0;
  const FixedPointResult baseline = solve_fixed_point(base, options);
  for (double p : grid) {
    if (p < 0 || p > 1) throw Error("attack probability outside [0,1]");
    ChainSpec s = spec;
    s.p_att = p;
    out.points.push_back(solve_fixed_point(s, options));
    std::vector<double> delta(spec.size(), 0.0);
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const double b = baseline.nodes[i].S;
      delta[i] = b > 0 ? 100.0 * (out.points.back().nodes[i].S - b) / b : 0.0;
    }
    out.delta_pct.push_back(std::move(delta));
  }
  return out;
}

}  // namespace zigdrain
