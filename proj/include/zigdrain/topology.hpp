#pragma once

#include <vector>

#include "zigdrain/types.hpp"

namespace zigdrain {

/// Static node placement under a disk model. Node ids index `positions`.
struct Topology {
  std::vector<Position> positions;
  double comm_range = 30.0;
  double interference_range = 40.0;
  NodeId gateway = 0;

  std::size_t size() const { return positions.size(); }
  double dist(NodeId a, NodeId b) const { return distance(positions[a], positions[b]); }
  bool can_decode(NodeId a, NodeId b) const { return a != b && dist(a, b) <= comm_range; }
  bool interferes(NodeId a, NodeId b) const { return a != b && dist(a, b) <= interference_range; }
  std::vector<NodeId> comm_neighbors(NodeId n) const;
  std::vector<NodeId> interference_neighbors(NodeId n) const;

  /// Ranges and gateway id; connectivity is checked by shortest_path_routes.
  void validate() const;
};

class DisconnectedNode : public Error {
 public:
  explicit DisconnectedNode(std::vector<NodeId> nodes);
  const std::vector<NodeId>& nodes() const { return nodes_; }

 private:
  std::vector<NodeId> nodes_;
};

/// Hop-count shortest path next hops toward the gateway; ties go to the lowest id.
/// The gateway's own entry is kNoNode.
std::vector<NodeId> shortest_path_routes(const Topology& topo);

/// src, next hop, ..., gateway.
std::vector<NodeId> route_path(const std::vector<NodeId>& next_hop, NodeId src);

}  // namespace zigdrain
