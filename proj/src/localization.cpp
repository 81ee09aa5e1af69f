#include "zigdrain/localization.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace zigdrain {

VariationReport throughput_variation(const std::vector<double>& baseline, const std::vector<double>& current) {
  if (baseline.size() != current.size()) throw Error("throughput series cover different node sets");
  VariationReport r;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    const auto id = static_cast<NodeId>(i);
    if (baseline[i] > 0)
      r.delta_pct[id] = 100.0 * (current[i] - baseline[i]) / baseline[i];
    else
      r.zero_baseline.push_back(id);
  }
  return r;
}

std::vector<NodeId> identify_suspects(const std::vector<Path>& paths, const std::map<NodeId, double>& delta_pct,
                                      double delta, double delta_prime) {
  if (!(delta > 0) || !(delta_prime > 0)) throw Error("thresholds must be positive");
  auto ds = [&](NodeId n) {
    const auto it = delta_pct.find(n);
    return it == delta_pct.end() ? 0.0 : it->second;
  };
  std::set<NodeId> suspects;
  for (const auto& path : paths) {
    const std::size_t m = path.size();
    if (m < 2 || ds(path[0]) > -delta) continue;
    // 0-based: the head is path[m-1], so i runs over the source and the relays.
    for (std::size_t i = 0; i + 1 < m; ++i) {
      const double d = ds(path[i]);
      if (d >= -delta) continue;
      if (i + 2 == m || std::abs(d - ds(path[i + 1])) > delta_prime) {
        suspects.insert(path[i]);
        if (i > 0 && std::abs(d - ds(path[i - 1])) < delta_prime) suspects.insert(path[i - 1]);
      }
    }
  }
  return {suspects.begin(), suspects.end()};
}

bool disk_separates(Position a, Position b, const std::vector<Position>& others, double radius, int samples) {
  if (distance(a, b) > 2 * radius) return false;
  // Any qualifying disk has its centre in the lens of the two radius-R disks; at a
  // fixed centre the smallest disk covering a and b is the best candidate.
  auto ok = [&](Position c) {
    const double r = std::max(distance(c, a), distance(c, b));
    if (r > radius + 1e-9) return false;
    return std::none_of(others.begin(), others.end(), [&](Position o) { return distance(c, o) <= r + 1e-9; });
  };
  const Position mid{(a.x + b.x) / 2, (a.y + b.y) / 2};
  if (ok(mid)) return true;
  const double half = distance(a, b) / 2;
  const double h = std::sqrt(std::max(0.0, radius * radius - half * half));
  double ux = 1, uy = 0;
  if (half > 0) {
    ux = (b.x - a.x) / (2 * half);
    uy = (b.y - a.y) / (2 * half);
  }
  // Lens coordinates: s along a->b in [-(R-half), R-half] around mid, t along the bisector in [-h, h].
  const double s_max = radius - half;
  for (int i = 0; i <= samples; ++i) {
    const double t = -h + 2 * h * i / samples;
    for (int j = 0; j <= samples; ++j) {
      const double s = -s_max + 2 * s_max * j / samples;
      const Position c{mid.x + s * ux - t * uy, mid.y + s * uy + t * ux};
      if (ok(c)) return true;
    }
  }
  return false;
}

std::vector<std::vector<NodeId>> group_suspects(const std::vector<NodeId>& suspects,
                                                const std::vector<NodeId>& non_suspects,
                                                const std::vector<Position>& positions,
                                                const GroupingOptions& options) {
  if (!(options.radius > 0)) throw Error("grouping radius must be positive");
  std::vector<Position> others;
  for (NodeId n : non_suspects) others.push_back(positions.at(n));

  std::vector<std::size_t> parent(suspects.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < suspects.size(); ++i)
    for (std::size_t j = i + 1; j < suspects.size(); ++j)
      if (disk_separates(positions.at(suspects[i]), positions.at(suspects[j]), others, options.radius,
                         options.samples))
        parent[find(j)] = find(i);

  std::map<std::size_t, std::vector<NodeId>> comps;
  for (std::size_t i = 0; i < suspects.size(); ++i) comps[find(i)].push_back(suspects[i]);
  std::vector<std::vector<NodeId>> groups;
  for (auto& [root, g] : comps) {
    std::sort(g.begin(), g.end());
    if (g.size() >= options.min_group_size) groups.push_back(std::move(g));
  }
  std::stable_sort(groups.begin(), groups.end(), [](const auto& x, const auto& y) { return x.size() > y.size(); });
  return groups;
}

Position estimate_location(const std::vector<NodeId>& group, const std::map<NodeId, double>& delta_pct,
                           const std::vector<Position>& positions) {
  if (group.empty()) throw EmptyGroup();
  double total = 0;
  for (NodeId n : group) total += std::abs(delta_pct.at(n));
  Position est{0, 0};
  if (total == 0) {
    for (NodeId n : group) {
      est.x += positions.at(n).x / group.size();
      est.y += positions.at(n).y / group.size();
    }
    return est;
  }
  for (NodeId n : group) {
    const double w = std::abs(delta_pct.at(n)) / total;
    est.x += w * positions.at(n).x;
    est.y += w * positions.at(n).y;
  }
  return est;
}

}  // namespace zigdrain
