#pragma once

#include <map>
#include <vector>

#include "zigdrain/types.hpp"

namespace zigdrain {

using Path = std::vector<NodeId>;  // source first, analysis head last

struct VariationReport {
  std::map<NodeId, double> delta_pct;
  std::vector<NodeId> zero_baseline;  // excluded from delta_pct
};

/// Per-node percentage change; inputs are indexed by node id.
VariationReport throughput_variation(const std::vector<double>& baseline, const std::vector<double>& current);

/// Suspected victim nodes along each path. Nodes without a ΔS entry are treated as unchanged.
std::vector<NodeId> identify_suspects(const std::vector<Path>& paths, const std::map<NodeId, double>& delta_pct,
                                      double delta, double delta_prime);

struct GroupingOptions {
  double radius = 40.0;
  std::size_t min_group_size = 2;
  int samples = 24;  // lens sampling resolution per axis
};

/// True when some disk of radius at most R contains both a and b and none of `others`.
bool disk_separates(Position a, Position b, const std::vector<Position>& others, double radius, int samples = 24);

/// Connected components of the "can share a disk" relation, largest first; small groups dropped.
std::vector<std::vector<NodeId>> group_suspects(const std::vector<NodeId>& suspects,
                                                const std::vector<NodeId>& non_suspects,
                                                const std::vector<Position>& positions,
                                                const GroupingOptions& options = {});

class EmptyGroup : public Error {
 public:
  EmptyGroup() : Error("cannot locate an empty group") {}
};

/// |ΔS|-weighted centroid of the group's positions.
Position estimate_location(const std::vector<NodeId>& group, const std::map<NodeId, double>& delta_pct,
                           const std::vector<Position>& positions);

}  // namespace zigdrain
