#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "splag/bbl.hpp"
#include "splag/geometry.hpp"

namespace splag {

/// Local equirectangular projection about (lat0, lon0):
/// x = R * dlon * cos(lat0), y = R * dlat, angles in radians.
struct LocalProjection {
  static constexpr double kEarthRadiusM = 6371000.0;
  double lat0 = 0.0;
  double lon0 = 0.0;

  Vec2 forward(double lat, double lon) const;
  std::pair<double, double> inverse(Vec2 p) const;  // (lat, lon)
};

struct GeoPoint {
  BblKey id;
  double lat = 0.0;
  double lon = 0.0;
};

struct ProjectedPoint {
  BblKey id;
  double x = 0.0;
  double y = 0.0;

  Vec2 xy() const { return {x, y}; }
};

struct Projection {
  LocalProjection frame;
  std::vector<ProjectedPoint> points;
};

/// Projects about the centroid of the input. Empty input yields no points.
Projection project(std::span<const GeoPoint> points);

struct GridPartition {
  std::int64_t row = 0;
  std::int64_t col = 0;
  std::vector<std::size_t> members;  // indices into the point set, ascending
};

/// Square cells anchored at the bounding-box minimum corner; only occupied
/// cells are materialized.
class SpatialGrid {
 public:
  double cell_size() const { return cell_size_; }
  Vec2 origin() const { return origin_; }
  const std::vector<GridPartition>& partitions() const { return partitions_; }
  std::optional<std::size_t> find(std::int64_t row, std::int64_t col) const;
  std::pair<std::int64_t, std::int64_t> cell_of(Vec2 p) const;

 private:
  friend SpatialGrid build_grid(std::span<const ProjectedPoint>, double);
  double cell_size_ = 0.0;
  Vec2 origin_;
  std::vector<GridPartition> partitions_;  // sorted by (row, col)
  std::unordered_map<std::uint64_t, std::size_t> lookup_;
};

/// Throws Error for cell_size <= 0 or non-finite coordinates.
SpatialGrid build_grid(std::span<const ProjectedPoint> points, double cell_size);

/// Candidate region for one partition: the partition's convex hull buffered
/// by the search radius, and every point that falls inside it.
struct SearchSpace {
  std::size_t partition = 0;
  std::vector<Vec2> polygon;
  std::vector<std::size_t> candidates;  // ascending
};

SearchSpace search_space(const SpatialGrid& grid, std::size_t partition,
                         std::span<const ProjectedPoint> points, double radius);

struct Neighbor {
  std::uint32_t index = 0;
  double distance = 0.0;
};

/// Symmetric, irreflexive fixed-radius adjacency. Neighbor lists are sorted by
/// index; every stored distance is <= radius.
class NeighborGraph {
 public:
  NeighborGraph() = default;
  NeighborGraph(std::vector<BblKey> ids, double radius);

  std::size_t size() const { return ids_.size(); }
  double radius() const { return radius_; }
  const std::vector<BblKey>& ids() const { return ids_; }
  std::span<const Neighbor> neighbors(std::size_t i) const { return adjacency_[i]; }
  std::vector<Neighbor>& mutable_neighbors(std::size_t i) { return adjacency_[i]; }
  std::optional<std::size_t> index_of(const BblKey& id) const;
  std::size_t edge_count() const;  // directed entries, i.e. twice the undirected count

  /// Undirected edges (i < j) with distances; handy for set comparison.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_set() const;

  friend bool operator==(const NeighborGraph& a, const NeighborGraph& b);

 private:
  std::vector<BblKey> ids_;
  double radius_ = 0.0;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::unordered_map<BblKey, std::size_t, BblHash> index_;
};

/// The single neighbor predicate shared by every search path: closed ball in
/// the planar projection.
inline bool within_radius(const ProjectedPoint& a, const ProjectedPoint& b, double radius, double& dist) {
  double dx = a.x - b.x, dy = a.y - b.y;
  double d2 = dx * dx + dy * dy;
  if (d2 > radius * radius) return false;
  dist = std::sqrt(d2);
  return true;
}

struct GridSearchStats {
  std::size_t partitions = 0;
  std::size_t candidate_pairs = 0;  // member x candidate distance checks
  std::size_t max_candidates = 0;
};

/// Gridded spatial indexing: per partition, buffered-hull search space, then
/// exact distance checks against that partition's candidates only.
NeighborGraph neighbors_grid(std::span<const ProjectedPoint> points, double radius, double cell_size,
                             GridSearchStats* stats = nullptr, unsigned threads = 0);

/// All-pairs reference search.
NeighborGraph neighbors_brute(std::span<const ProjectedPoint> points, double radius);

struct BenchmarkRow {
  std::size_t n = 0;
  double grid_seconds = 0.0;
  double brute_seconds = 0.0;
  std::size_t grid_edges = 0;
  std::size_t brute_edges = 0;
  std::size_t candidate_pairs = 0;
  bool identical = false;
};

/// Times both searches on uniform random points in a square of side
/// `extent_m`. Throws when n_values is not ascending.
std::vector<BenchmarkRow> benchmark_index(std::span<const std::size_t> n_values, double radius,
                                          double cell_size, std::uint64_t seed, double extent_m = 25000.0,
                                          unsigned threads = 1);
void write_benchmark_csv(std::ostream& out, std::span<const BenchmarkRow> rows);

/// Uniform points in [0, extent]^2 with synthetic ids (1, i, 0).
std::vector<ProjectedPoint> uniform_points(std::size_t n, double extent_m, std::uint64_t seed);

/// Edge list persistence: header src_bbl,dst_bbl,distance_m; both directions,
/// sorted by (src, dst). A JSON sidecar "<path>.json" records radius and counts.
void write_graph_csv(const std::filesystem::path& path, const NeighborGraph& graph,
                     const std::string& config_hash = {}, std::uint64_t seed = 0);
NeighborGraph read_graph_csv(const std::filesystem::path& path);

}  // namespace splag
