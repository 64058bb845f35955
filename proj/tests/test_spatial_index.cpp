#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "splag/common.hpp"
#include "splag/geometry.hpp"
#include "splag/spatial_index.hpp"

using namespace splag;

namespace {

ProjectedPoint pt(std::int64_t lot, double x, double y) { return {make_bbl(1, 1, lot), x, y}; }

/// Independent all-pairs oracle: (i, j) -> distance for i < j.
std::map<std::pair<std::uint32_t, std::uint32_t>, double> oracle_edges(const std::vector<ProjectedPoint>& pts,
                                                                     double radius) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> edges;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      double d = std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y);
      if (d <= radius) edges[{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)}] = d;
    }
  }
  return edges;
}

void check_matches_oracle(const NeighborGraph& g, const std::vector<ProjectedPoint>& pts, double radius) {
  auto expected = oracle_edges(pts, radius);
  REQUIRE(g.size() == pts.size());
  CHECK(g.edge_count() == 2 * expected.size());
  std::size_t seen = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (const Neighbor& n : g.neighbors(i)) {
      CHECK(n.index != i);
      const auto self = static_cast<std::uint32_t>(i);
      const std::pair<std::uint32_t, std::uint32_t> key{std::min(self, n.index), std::max(self, n.index)};
      auto it = expected.find(key);
      REQUIRE(it != expected.end());
      CHECK(n.distance == doctest::Approx(it->second).epsilon(1e-12));
      CHECK(n.distance <= radius);
      ++seen;
    }
  }
  CHECK(seen == 2 * expected.size());
}

std::vector<ProjectedPoint> clustered(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 400.0);
  std::uniform_real_distribution<double> unit(0.0, 6000.0);
  std::vector<ProjectedPoint> pts;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 3 == 0) {
      pts.push_back(pt(static_cast<std::int64_t>(i), unit(rng), unit(rng)));
    } else {
      double cx = (i % 2) ? 1500.0 : 4000.0;
      pts.push_back(pt(static_cast<std::int64_t>(i), cx + normal(rng), 3000.0 + normal(rng)));
    }
  }
  // exact duplicates land in the same partition and must be neighbors at 0 m
  pts.push_back(pt(100000, pts[1].x, pts[1].y));
  return pts;
}

}  // namespace

TEST_CASE("grid search equals the all-pairs oracle") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto pts = clustered(1500, seed);
    for (double radius : {150.0, 500.0}) {
      for (double cell : {250.0, 500.0, 1700.0}) {
        check_matches_oracle(neighbors_grid(pts, radius, cell, nullptr, 1), pts, radius);
      }
    }
    check_matches_oracle(neighbors_brute(pts, 500.0), pts, 500.0);
  }
}

TEST_CASE("grid search is independent of thread count") {
  auto pts = uniform_points(3000, 10000.0, 11);
  NeighborGraph one = neighbors_grid(pts, 500.0, 500.0, nullptr, 1);
  NeighborGraph four = neighbors_grid(pts, 500.0, 500.0, nullptr, 4);
  CHECK(one == four);
  CHECK(one == neighbors_brute(pts, 500.0));
}

TEST_CASE("radius boundary is a closed ball") {
  std::vector<ProjectedPoint> pts{pt(1, 0, 0), pt(2, 499.9, 0), pt(3, 0, 500.1), pt(4, -300, -400)};
  NeighborGraph g = neighbors_grid(pts, 500.0, 500.0);
  auto n0 = g.neighbors(0);
  REQUIRE(n0.size() == 2);
  CHECK(n0[0].index == 1);
  CHECK(n0[0].distance == doctest::Approx(499.9));
  CHECK(n0[1].index == 3);
  CHECK(n0[1].distance == 500.0);
  CHECK(g.neighbors(2).empty());
}

TEST_CASE("collinear points use a capsule search space") {
  std::vector<ProjectedPoint> pts{pt(1, 0, 0), pt(2, 400, 0), pt(3, 800, 0)};
  for (double cell : {100.0, 500.0, 2000.0}) {
    NeighborGraph g = neighbors_grid(pts, 500.0, cell);
    auto edges = g.edge_set();
    REQUIRE(edges.size() == 2);
    CHECK(edges[0] == std::pair<std::uint32_t, std::uint32_t>{0, 1});
    CHECK(edges[1] == std::pair<std::uint32_t, std::uint32_t>{1, 2});
  }
}

TEST_CASE("grid partitions") {
  std::vector<ProjectedPoint> corners{pt(1, 0, 0), pt(2, 2000, 0), pt(3, 0, 2000), pt(4, 2000, 2000)};
  SpatialGrid g = build_grid(corners, 500.0);
  CHECK(g.partitions().size() == 4);
  for (const auto& part : g.partitions()) CHECK(part.members.size() == 1);

  std::vector<ProjectedPoint> dense{pt(1, 0, 0), pt(2, 10, 10), pt(3, 499, 499), pt(4, 500, 0), pt(5, 1200, 30)};
  SpatialGrid h = build_grid(dense, 500.0);
  REQUIRE(h.partitions().size() == 3);
  CHECK(h.partitions()[0].members == std::vector<std::size_t>{0, 1, 2});
  std::size_t total = 0;
  for (const auto& part : h.partitions()) total += part.members.size();
  CHECK(total == dense.size());
  auto [row, col] = h.cell_of({1200, 30});
  CHECK(row == 0);
  CHECK(col == 2);
  REQUIRE(h.find(0, 2).has_value());
  CHECK(h.partitions()[*h.find(0, 2)].members == std::vector<std::size_t>{4});
  CHECK_FALSE(h.find(1, 1).has_value());

  CHECK_THROWS_AS(build_grid(dense, 0.0), Error);
  CHECK_THROWS_AS(build_grid(std::vector<ProjectedPoint>{pt(1, std::nan(""), 0)}, 500.0), Error);
}

TEST_CASE("search space holds every point within the radius of its partition") {
  // member at the origin cell, candidate 499 m away in a different cell
  std::vector<ProjectedPoint> pts{pt(1, 0, 0), pt(2, 100, 100), pt(3, 100 + 499 / std::sqrt(2.0), 100 + 499 / std::sqrt(2.0)),
                                  pt(4, 2000, 2000)};
  SpatialGrid g = build_grid(pts, 200.0);
  auto first = g.find(0, 0);
  REQUIRE(first.has_value());
  SearchSpace s = search_space(g, *first, pts, 500.0);
  std::set<std::size_t> cand(s.candidates.begin(), s.candidates.end());
  CHECK(cand.count(0));
  CHECK(cand.count(1));
  CHECK(cand.count(2));
  CHECK_FALSE(cand.count(3));

  auto many = uniform_points(2000, 5000.0, 5);
  SpatialGrid grid = build_grid(many, 700.0);
  std::size_t missed = 0;
  for (std::size_t p = 0; p < grid.partitions().size(); ++p) {
    SearchSpace space = search_space(grid, p, many, 500.0);
    std::set<std::size_t> c(space.candidates.begin(), space.candidates.end());
    for (std::size_t m : grid.partitions()[p].members) {
      for (std::size_t j = 0; j < many.size(); ++j) {
        if (std::hypot(many[m].x - many[j].x, many[m].y - many[j].y) <= 500.0 && !c.count(j)) ++missed;
      }
    }
  }
  CHECK(missed == 0);
}

TEST_CASE("convex hull and buffer") {
  std::vector<Vec2> square{{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}, {0.5, 0}, {1, 1}};
  auto hull = convex_hull(square);
  CHECK(hull.size() == 4);
  double area = 0;
  for (std::size_t i = 0; i < hull.size(); ++i) area += cross(hull[i], hull[(i + 1) % hull.size()]);
  CHECK(area / 2 == doctest::Approx(1.0));  // positive: counter-clockwise

  CHECK(convex_hull(std::vector<Vec2>{{3, 3}, {3, 3}}).size() == 1);
  CHECK(convex_hull(std::vector<Vec2>{{0, 0}, {1, 1}, {2, 2}}).size() == 2);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-400.0, 1400.0);
  const double r = 300.0;
  for (const auto& shape : {std::vector<Vec2>{{0, 0}}, std::vector<Vec2>{{0, 0}, {1000, 500}},
                            std::vector<Vec2>{{0, 0}, {1000, 0}, {800, 900}, {100, 700}}}) {
    auto h = convex_hull(shape);
    ConvexPolygon poly(buffer_convex_hull(h, r));
    int wrong = 0;
    for (int k = 0; k < 4000; ++k) {
      Vec2 q{u(rng), u(rng)};
      double d = distance_to_convex(q, h);
      if (d <= r && !poly.contains(q)) ++wrong;
      if (d > r + 0.01 && poly.contains(q)) ++wrong;
    }
    CHECK(wrong == 0);
  }
}

TEST_CASE("local projection") {
  LocalProjection proj{40.7, -73.95};
  Vec2 p = proj.forward(40.71, -73.95);
  CHECK(p.x == doctest::Approx(0.0));
  CHECK(p.y == doctest::Approx(6371000.0 * 0.01 * std::numbers::pi / 180.0).epsilon(1e-9));
  CHECK(p.y == doctest::Approx(1111.9).epsilon(1e-4));
  Vec2 q = proj.forward(40.7, -73.94);
  CHECK(q.x == doctest::Approx(1111.949 * std::cos(40.7 * std::numbers::pi / 180.0)).epsilon(1e-5));
  auto [lat, lon] = proj.inverse(proj.forward(40.6123, -74.0456));
  CHECK(lat == doctest::Approx(40.6123).epsilon(1e-12));
  CHECK(lon == doctest::Approx(-74.0456).epsilon(1e-12));

  std::vector<GeoPoint> geo{{make_bbl(1, 1, 1), 40.7, -74.0}, {make_bbl(1, 1, 2), 40.8, -73.9}};
  Projection pr = project(geo);
  CHECK(pr.frame.lat0 == doctest::Approx(40.75));
  CHECK(pr.points[0].x == doctest::Approx(-pr.points[1].x));
  CHECK(project(std::vector<GeoPoint>{}).points.empty());
}

TEST_CASE("graph csv round trip") {
  auto pts = clustered(300, 9);
  NeighborGraph g = neighbors_grid(pts, 500.0, 500.0);
  auto path = std::filesystem::temp_directory_path() / "splag_test_graph.csv";
  write_graph_csv(path, g, "abc", 7);
  NeighborGraph back = read_graph_csv(path);
  CHECK(back == g);
  CHECK(back.radius() == 500.0);
  CHECK(back.index_of(pts[5].id) == std::optional<std::size_t>(5));
}

TEST_CASE("benchmark reports identical graphs") {
  std::vector<std::size_t> ns{200, 800};
  auto rows = benchmark_index(ns, 500.0, 500.0, 1, 5000.0);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.identical);
    CHECK(r.grid_edges == r.brute_edges);
  }
  std::vector<std::size_t> bad{800, 200};
  CHECK_THROWS_AS(benchmark_index(bad, 500.0, 500.0, 1), Error);
}
