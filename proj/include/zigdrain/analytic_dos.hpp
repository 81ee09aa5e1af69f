#pragma once

#include <cstdint>
#include <vector>

#include "zigdrain/topology.hpp"

namespace zigdrain {

/// Per-slot CSMA/CA throughput model for a routed chain with a blind attacker.
///
/// Vectors are indexed by node id; the gateway entry is unused apart from
/// the neighbour sets. Rates are per backoff slot.
struct ChainSpec {
  NodeId gateway = 0;
  std::vector<std::vector<NodeId>> neighbors;
  std::vector<NodeId> next_hop;
  std::vector<bool> interfered;
  double gen_rate = 0.02;   // packets per slot
  int packet_slots = 3;     // L
  int mac_be = 3;
  double p_att = 0.0;

  std::size_t size() const { return neighbors.size(); }
  void validate() const;
};

/// Builds neighbour sets (interference range) and shortest-path routes from a topology.
ChainSpec chain_from_topology(const Topology& topo, const std::vector<NodeId>& interfered);

/// The five-node chain of the reference figure. Case 1: attacker covers nodes 2 and 3; case 2: node 3.
Topology fig1_topology();
ChainSpec fig1_chain(int attack_case);

struct NodeSolution {
  double tau = 0, alpha = 0, rho = 0, p = 0, p_s = 0, S = 0;
};

struct FixedPointResult {
  std::vector<NodeSolution> nodes;  // gateway entry all zero
  double residual = 0;
  int iterations = 0;
  std::vector<NodeId> clamped;      // nodes whose alpha hit the [0,1] clamp
  bool second_fixed_point = false;  // a random restart converged elsewhere
};

class NoConvergence : public Error {
 public:
  NoConvergence(int iterations, double residual);
  double residual() const { return residual_; }

 private:
  double residual_;
};

struct SolverOptions {
  double damping = 0.5;
  double tolerance = 1e-9;
  int max_iterations = 100000;
  bool restart_check = true;
  std::uint64_t restart_seed = 1;
};

FixedPointResult solve_fixed_point(const ChainSpec& spec, const SolverOptions& options = {});

/// Largest absolute difference between the stored quantities and the model
/// equations re-evaluated at the stored (rho, p).
double model_residual(const ChainSpec& spec, const std::vector<NodeSolution>& nodes);

struct SweepResult {
  std::vector<double> grid;
  std::vector<FixedPointResult> points;
  std::vector<std::vector<double>> delta_pct;  // [point][node], relative to p_att = 0
};

SweepResult sweep_attack_rate(const ChainSpec& spec, const std::vector<double>& grid,
                              const SolverOptions& options = {});

}  // namespace zigdrain
