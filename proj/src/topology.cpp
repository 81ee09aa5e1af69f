#include "zigdrain/topology.hpp"

#include <deque>
#include <string>

namespace zigdrain {

std::vector<NodeId> Topology::comm_neighbors(NodeId n) const {
  std::vector<NodeId> out;
  for (NodeId j = 0; j < static_cast<NodeId>(size()); ++j)
    if (can_decode(n, j)) out.push_back(j);
  return out;
}

std::vector<NodeId> Topology::interference_neighbors(NodeId n) const {
  std::vector<NodeId> out;
  for (NodeId j = 0; j < static_cast<NodeId>(size()); ++j)
    if (interferes(n, j)) out.push_back(j);
  return out;
}

void Topology::validate() const {
  if (!(comm_range > 0)) throw Error("comm_range must be positive");
  if (interference_range < comm_range) throw Error("interference_range must be >= comm_range");
  if (gateway < 0 || gateway >= static_cast<NodeId>(size())) throw Error("gateway id out of range");
}

namespace {
std::string list_ids(const std::vector<NodeId>& ids) {
  std::string s;
  for (auto id : ids) s += (s.empty() ? "" : ",") + std::to_string(id);
  return s;
}
}  // namespace

DisconnectedNode::DisconnectedNode(std::vector<NodeId> nodes)
    : Error("nodes unreachable from the gateway: " + list_ids(nodes)), nodes_(std::move(nodes)) {}

std::vector<NodeId> shortest_path_routes(const Topology& topo) {
  topo.validate();
  const auto n = static_cast<NodeId>(topo.size());
  std::vector<int> hops(n, -1);
  std::deque<NodeId> queue{topo.gateway};
  hops[topo.gateway] = 0;
  while (!queue.empty()) {
    const NodeId u = queue.front();
    queue.pop_front();
    for (NodeId v : topo.comm_neighbors(u)) {
      if (hops[v] >= 0) continue;
      hops[v] = hops[u] + 1;
      queue.push_back(v);
    }
  }
  std::vector<NodeId> unreachable;
  for (NodeId i = 0; i < n; ++i)
    if (hops[i] < 0) unreachable.push_back(i);
  if (!unreachable.empty()) throw DisconnectedNode(unreachable);

  std::vector<NodeId> next(n, kNoNode);
  for (NodeId i = 0; i < n; ++i) {
    if (i == topo.gateway) continue;
    for (NodeId j : topo.comm_neighbors(i)) {  // ascending ids
      if (hops[j] == hops[i] - 1) {
        next[i] = j;
        break;
      }
    }
  }
  return next;
}

std::vector<NodeId> route_path(const std::vector<NodeId>& next_hop, NodeId src) {
  std::vector<NodeId> path{src};
  while (next_hop.at(path.back()) != kNoNode) {
    path.push_back(next_hop[path.back()]);
    if (path.size() > next_hop.size()) throw Error("routing loop");
  }
  return path;
}

}  // namespace zigdrain
