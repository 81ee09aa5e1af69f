#include <random>

#include "catch_amalgamated.hpp"
#include "zigdrain/analytic_dos.hpp"
#include "zigdrain/localization.hpp"

using namespace zigdrain;
using Catch::Approx;

TEST_CASE("throughput variation", "[localization]") {
  const auto r = throughput_variation({1.0, 2.0, 0.0}, {0.5, 2.0, 1.0});
  CHECK(r.delta_pct.at(0) == Approx(-50.0));
  CHECK(r.delta_pct.at(1) == 0.0);
  CHECK(r.delta_pct.count(2) == 0);
  CHECK(r.zero_baseline == std::vector<NodeId>{2});
  CHECK_THROWS_AS(throughput_variation({1.0}, {1.0, 2.0}), Error);
}

TEST_CASE("Algorithm 1", "[localization]") {
  SECTION("unaffected path contributes nothing") {
    const std::vector<Path> paths{{1, 2, 3, 0}};
    CHECK(identify_suspects(paths, {{1, -2.0}, {2, -40.0}, {3, -40.0}}, 5, 10).empty());
  }
  SECTION("relay pair dropping in lockstep before a recovering hop") {
    // 4 -> 3 -> 2 -> 1 -> head; 3 and 2 are hit, 1 is not.
    const std::vector<Path> paths{{4, 3, 2, 1, 0}};
    const std::map<NodeId, double> ds{{4, -45.0}, {3, -42.0}, {2, -40.0}, {1, -2.0}};
    const auto s = identify_suspects(paths, ds, 5, 10);
    CHECK(s == std::vector<NodeId>{2, 3});
  }
  SECTION("last relay before the head is added unconditionally") {
    const std::vector<Path> paths{{2, 1, 0}};
    CHECK(identify_suspects(paths, {{2, -30.0}, {1, -29.0}}, 5, 10) == std::vector<NodeId>{1, 2});
  }
  SECTION("first node has no predecessor to add") {
    const std::vector<Path> paths{{7, 6, 0}};
    CHECK(identify_suspects(paths, {{7, -60.0}, {6, 0.0}}, 5, 10) == std::vector<NodeId>{7});
  }
  SECTION("analytic case 1 variations") {
    auto spec = fig1_chain(1);
    const auto sweep = sweep_attack_rate(spec, {0.3});
    std::map<NodeId, double> ds;
    for (NodeId i = 1; i <= 5; ++i) ds[i] = sweep.delta_pct[0][i];
    const auto nh = shortest_path_routes(fig1_topology());
    std::vector<Path> paths;
    for (NodeId i = 1; i <= 5; ++i) paths.push_back(route_path(nh, i));
    const auto s = identify_suspects(paths, ds, 5, 10);
    CHECK(std::count(s.begin(), s.end(), 2) == 1);
    CHECK(std::count(s.begin(), s.end(), 3) == 1);
    CHECK(std::count(s.begin(), s.end(), 5) == 0);
  }
  CHECK_THROWS_AS(identify_suspects({}, {}, 0, 10), Error);
}

TEST_CASE("suspect grouping", "[localization]") {
  const std::vector<Position> pos{{0, 0}, {30, 0}, {15, 0}, {200, 200}};
  SECTION("close suspects with nobody between share a group") {
    const auto g = group_suspects({0, 1}, {3}, pos);
    REQUIRE(g.size() == 1);
    CHECK(g[0] == std::vector<NodeId>{0, 1});
  }
  SECTION("non-suspect at the midpoint splits them") {
    GroupingOptions o;
    o.min_group_size = 1;
    const auto g = group_suspects({0, 1}, {2, 3}, pos, o);
    CHECK(g.size() == 2);
  }
  SECTION("a single suspect is discarded when groups need two members") {
    CHECK(group_suspects({0}, {3}, pos).empty());
    GroupingOptions o;
    o.min_group_size = 1;
    CHECK(group_suspects({0}, {3}, pos, o).size() == 1);
  }
  SECTION("too far apart for one disk") {
    const std::vector<Position> far{{0, 0}, {90, 0}};
    CHECK_FALSE(disk_separates(far[0], far[1], {}, 40.0));
  }
  SECTION("an off-axis disk avoids a nearby non-suspect") {
    // The midpoint disk would contain (15, -8); a disk centred above the segment does not.
    CHECK(disk_separates({0, 0}, {30, 0}, {{15, -8}}, 40.0));
  }
}

TEST_CASE("weighted centroid", "[localization]") {
  const std::vector<Position> pos{{0, 0}, {10, 0}, {0, 10}};
  CHECK(estimate_location({1}, {{1, -20.0}}, pos) == Position{10, 0});
  const auto mid = estimate_location({0, 1}, {{0, -30.0}, {1, -30.0}}, pos);
  CHECK(mid.x == Approx(5.0));
  CHECK(mid.y == Approx(0.0));
  CHECK_THROWS_AS(estimate_location({}, {}, pos), EmptyGroup);
}

TEST_CASE("localization invariants", "[localization][property]") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    std::vector<Position> pos;
    std::vector<NodeId> group;
    std::map<NodeId, double> ds;
    for (int i = 0; i < n; ++i) {
      pos.push_back({u(rng), u(rng)});
      group.push_back(i);
      ds[i] = -(0.5 + u(rng));
    }
    const Position e = estimate_location(group, ds, pos);
    double minx = 1e9, maxx = -1e9, miny = 1e9, maxy = -1e9;
    for (const auto& p : pos) {
      minx = std::min(minx, p.x), maxx = std::max(maxx, p.x);
      miny = std::min(miny, p.y), maxy = std::max(maxy, p.y);
    }
    REQUIRE(e.x >= minx - 1e-9);
    REQUIRE(e.x <= maxx + 1e-9);
    REQUIRE(e.y >= miny - 1e-9);
    REQUIRE(e.y <= maxy + 1e-9);

    // Weights sum to one: a common translation moves the estimate by the same amount.
    std::vector<Position> shifted = pos;
    for (auto& p : shifted) p.x += 17.0, p.y -= 4.0;
    const Position e2 = estimate_location(group, ds, shifted);
    REQUIRE(e2.x == Approx(e.x + 17.0));
    REQUIRE(e2.y == Approx(e.y - 4.0));

    // Scaling ΔS and the thresholds together changes nothing.
    std::map<NodeId, double> scaled;
    for (auto [k, v] : ds) scaled[k] = 3.5 * v;
    const Position e3 = estimate_location(group, scaled, pos);
    REQUIRE(e3.x == Approx(e.x));
    REQUIRE(e3.y == Approx(e.y));
    std::vector<Path> paths;
    for (int i = 0; i < n; ++i) paths.push_back({i, (i + 1) % n, 99});
    std::map<NodeId, double> mixed;
    for (auto [k, v] : ds) mixed[k] = (rng() % 2) ? v * 30 : -v;
    std::map<NodeId, double> mixed_scaled;
    for (auto [k, v] : mixed) mixed_scaled[k] = 2.5 * v;
    REQUIRE(identify_suspects(paths, mixed, 5, 10) == identify_suspects(paths, mixed_scaled, 12.5, 25));
    REQUIRE(identify_suspects(paths, mixed, 5, 10) == identify_suspects(paths, mixed, 5, 10));
  }
}

TEST_CASE("grouping is symmetric", "[localization][property]") {
  std::mt19937_64 rng(78);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Position a{u(rng), u(rng)}, b{u(rng), u(rng)};
    std::vector<Position> others;
    for (int k = 0; k < 5; ++k) others.push_back({u(rng), u(rng)});
    REQUIRE(disk_separates(a, b, others, 40.0) == disk_separates(b, a, others, 40.0));
  }
}
