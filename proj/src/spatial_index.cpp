#include "splag/spatial_index.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <tuple>

#include <nlohmann/json.hpp>

#include "splag/common.hpp"
#include "splag/csv_io.hpp"

namespace splag {

namespace {
constexpr double kDegToRad = std::numbers::pi / 180.0;
}

Vec2 LocalProjection::forward(double lat, double lon) const {
  return {kEarthRadiusM * (lon - lon0) * kDegToRad * std::cos(lat0 * kDegToRad),
          kEarthRadiusM * (lat - lat0) * kDegToRad};
}

std::pair<double, double> LocalProjection::inverse(Vec2 p) const {
  double lat = lat0 + p.y / kEarthRadiusM / kDegToRad;
  double lon = lon0 + p.x / (kEarthRadiusM * std::cos(lat0 * kDegToRad)) / kDegToRad;
  return {lat, lon};
}

Projection project(std::span<const GeoPoint> points) {
  Projection out;
  if (points.empty()) return out;
  double slat = 0.0, slon = 0.0;
  for (const auto& p : points) {
    slat += p.lat;
    slon += p.lon;
  }
  out.frame.lat0 = slat / static_cast<double>(points.size());
  out.frame.lon0 = slon / static_cast<double>(points.size());
  out.points.reserve(points.size());
  for (const auto& p : points) {
    Vec2 xy = out.frame.forward(p.lat, p.lon);
    out.points.push_back({p.id, xy.x, xy.y});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grid

std::pair<std::int64_t, std::int64_t> SpatialGrid::cell_of(Vec2 p) const {
  return {static_cast<std::int64_t>(std::floor((p.y - origin_.y) / cell_size_)),
          static_cast<std::int64_t>(std::floor((p.x - origin_.x) / cell_size_))};
}

namespace {
std::uint64_t cell_key(std::int64_t row, std::int64_t col) {
  return (static_cast<std::uint64_t>(row) << 32) ^ static_cast<std::uint64_t>(col);
}
}  // namespace

std::optional<std::size_t> SpatialGrid::find(std::int64_t row, std::int64_t col) const {
  if (row < 0 || col < 0 || row > UINT32_MAX || col > UINT32_MAX) return std::nullopt;
  auto it = lookup_.find(cell_key(row, col));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

SpatialGrid build_grid(std::span<const ProjectedPoint> points, double cell_size) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) throw Error("cell size must be positive");
  SpatialGrid grid;
  grid.cell_size_ = cell_size;
  if (points.empty()) return grid;

  Vec2 lo{points[0].x, points[0].y};
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw Error("non-finite coordinate for point " + p.id.str());
    }
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
  }
  grid.origin_ = lo;

  std::vector<std::tuple<std::int64_t, std::int64_t, std::size_t>> cells;
  cells.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto [row, col] = grid.cell_of(points[i].xy());
    if (row > UINT32_MAX || col > UINT32_MAX) throw Error("cell size too small for the point extent");
    cells.emplace_back(row, col, i);
  }
  std::sort(cells.begin(), cells.end());
  for (const auto& [row, col, idx] : cells) {
    if (grid.partitions_.empty() || grid.partitions_.back().row != row || grid.partitions_.back().col != col) {
      grid.partitions_.push_back({row, col, {}});
      grid.lookup_.emplace(cell_key(row, col), grid.partitions_.size() - 1);
    }
    grid.partitions_.back().members.push_back(idx);
  }
  return grid;
}

SearchSpace search_space(const SpatialGrid& grid, std::size_t partition, std::span<const ProjectedPoint> points,
                         double radius) {
  if (!(radius > 0.0)) throw Error("search radius must be positive");
  const GridPartition& part = grid.partitions().at(partition);
  if (part.members.empty()) throw Error("empty partition");

  std::vector<Vec2> member_xy;
  member_xy.reserve(part.members.size());
  for (std::size_t m : part.members) member_xy.push_back(points[m].xy());
  std::vector<Vec2> hull = convex_hull(member_xy);

  SearchSpace space;
  space.partition = partition;
  space.polygon = buffer_convex_hull(hull, radius);
  ConvexPolygon poly(space.polygon);

  auto [row_lo, col_lo] = grid.cell_of(poly.min_corner());
  auto [row_hi, col_hi] = grid.cell_of(poly.max_corner());
  row_lo = std::max<std::int64_t>(row_lo, 0);
  col_lo = std::max<std::int64_t>(col_lo, 0);

  auto scan = [&](const GridPartition& cell) {
    for (std::size_t idx : cell.members) {
      if (poly.contains(points[idx].xy())) space.candidates.push_back(idx);
    }
  };

  const double cell_span = static_cast<double>(row_hi - row_lo + 1) * static_cast<double>(col_hi - col_lo + 1);
  if (cell_span > static_cast<double>(grid.partitions().size())) {
    for (const auto& cell : grid.partitions()) {
      if (cell.row >= row_lo && cell.row <= row_hi && cell.col >= col_lo && cell.col <= col_hi) scan(cell);
    }
  } else {
    for (std::int64_t r = row_lo; r <= row_hi; ++r) {
      for (std::int64_t c = col_lo; c <= col_hi; ++c) {
        if (auto hit = grid.find(r, c)) scan(grid.partitions()[*hit]);
      }
    }
  }
  std::sort(space.candidates.begin(), space.candidates.end());
  return space;
}

// ---------------------------------------------------------------------------
// Graph

NeighborGraph::NeighborGraph(std::vector<BblKey> ids, double radius)
    : ids_(std::move(ids)), radius_(radius), adjacency_(ids_.size()) {
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw Error("duplicate point id " + ids_[i].str());
  }
}

std::optional<std::size_t> NeighborGraph::index_of(const BblKey& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t NeighborGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& a : adjacency_) n += a.size();
  return n;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> NeighborGraph::edge_set() const {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t i = 0; i < adjacency_.size(); ++i) {
    for (const auto& nb : adjacency_[i]) {
      if (i < nb.index) edges.emplace_back(i, nb.index);
    }
  }
  return edges;
}

bool operator==(const NeighborGraph& a, const NeighborGraph& b) {
  if (a.ids_ != b.ids_ || a.radius_ != b.radius_) return false;
  for (std::size_t i = 0; i < a.adjacency_.size(); ++i) {
    const auto& x = a.adjacency_[i];
    const auto& y = b.adjacency_[i];
    if (x.size() != y.size()) return false;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (x[k].index != y[k].index || x[k].distance != y[k].distance) return false;
    }
  }
  return true;
}

namespace {
std::vector<BblKey> ids_of(std::span<const ProjectedPoint> points) {
  std::vector<BblKey> ids;
  ids.reserve(points.size());
  for (const auto& p : points) ids.push_back(p.id);
  return ids;
}
}  // namespace

NeighborGraph neighbors_grid(std::span<const ProjectedPoint> points, double radius, double cell_size,
                             GridSearchStats* stats, unsigned threads) {
  if (!(radius > 0.0)) throw Error("search radius must be positive");
  NeighborGraph graph(ids_of(points), radius);
  SpatialGrid grid = build_grid(points, cell_size);
  const auto& parts = grid.partitions();

  std::vector<std::size_t> pairs(parts.size(), 0), cand(parts.size(), 0);
  // Each partition writes only its own members' adjacency lists.
  parallel_for(
      parts.size(),
      [&](std::size_t p) {
        SearchSpace space = search_space(grid, p, points, radius);
        cand[p] = space.candidates.size();
        for (std::size_t m : parts[p].members) {
          auto& out = graph.mutable_neighbors(m);
          for (std::size_t c : space.candidates) {
            double dist;
            if (c != m && within_radius(points[m], points[c], radius, dist)) {
              out.push_back({static_cast<std::uint32_t>(c), dist});
            }
          }
          pairs[p] += space.candidates.size();
        }
      },
      threads);

  if (stats) {
    stats->partitions = parts.size();
    stats->candidate_pairs = 0;
    stats->max_candidates = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      stats->candidate_pairs += pairs[p];
      stats->max_candidates = std::max(stats->max_candidates, cand[p]);
    }
  }
  return graph;
}

NeighborGraph neighbors_brute(std::span<const ProjectedPoint> points, double radius) {
  NeighborGraph graph(ids_of(points), radius);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t j = i + 1; j < points.size(); ++j) {
      double dist;
      if (within_radius(points[i], points[j], radius, dist)) {
        graph.mutable_neighbors(i).push_back({static_cast<std::uint32_t>(j), dist});
        graph.mutable_neighbors(j).push_back({static_cast<std::uint32_t>(i), dist});
      }
    }
  }
  // Lists come out ascending: entries j < i arrive in order of the outer loop, then j > i.
  return graph;
}

// ---------------------------------------------------------------------------
// Benchmark

std::vector<ProjectedPoint> uniform_points(std::size_t n, double extent_m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, extent_m);
  std::vector<ProjectedPoint> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = u(rng);
    double y = u(rng);
    pts.push_back({BblKey{1, static_cast<std::int64_t>(i), 0}, x, y});
  }
  return pts;
}

std::vector<BenchmarkRow> benchmark_index(std::span<const std::size_t> n_values, double radius, double cell_size,
                                          std::uint64_t seed, double extent_m, unsigned threads) {
  if (!std::is_sorted(n_values.begin(), n_values.end())) throw Error("benchmark sizes must be ascending");
  using clock = std::chrono::steady_clock;
  std::vector<BenchmarkRow> rows;
  for (std::size_t n : n_values) {
    auto pts = uniform_points(n, extent_m, mix_seed(seed, n));
    BenchmarkRow row;
    row.n = n;
    GridSearchStats stats;
    auto t0 = clock::now();
    NeighborGraph g = neighbors_grid(pts, radius, cell_size, &stats, threads);
    auto t1 = clock::now();
    NeighborGraph b = neighbors_brute(pts, radius);
    auto t2 = clock::now();
    row.grid_seconds = std::chrono::duration<double>(t1 - t0).count();
    row.brute_seconds = std::chrono::duration<double>(t2 - t1).count();
    row.grid_edges = g.edge_count() / 2;
    row.brute_edges = b.edge_count() / 2;
    row.candidate_pairs = stats.candidate_pairs;
    row.identical = g == b;
    rows.push_back(row);
  }
  return rows;
}

void write_benchmark_csv(std::ostream& out, std::span<const BenchmarkRow> rows) {
  out << "n,grid_seconds,brute_seconds,grid_edges,brute_edges,candidate_pairs,identical\n";
  for (const auto& r : rows) {
    out << r.n << ',' << format_double(r.grid_seconds) << ',' << format_double(r.brute_seconds) << ','
        << r.grid_edges << ',' << r.brute_edges << ',' << r.candidate_pairs << ',' << (r.identical ? 1 : 0)
        << '\n';
  }
}

// ---------------------------------------------------------------------------
// Persistence

void write_graph_csv(const std::filesystem::path& path, const NeighborGraph& graph, const std::string& config_hash,
                     std::uint64_t seed) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::vector<std::tuple<BblKey, BblKey, double>> edges;
  edges.reserve(graph.edge_count());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    for (const auto& nb : graph.neighbors(i)) edges.emplace_back(graph.ids()[i], graph.ids()[nb.index], nb.distance);
  }
  std::sort(edges.begin(), edges.end(),
            [](const auto& a, const auto& b) { return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b)); });

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "src_bbl,dst_bbl,distance_m\n";
  for (const auto& [s, d, dist] : edges) out << s.str() << ',' << d.str() << ',' << format_double(dist) << '\n';

  nlohmann::json meta;
  meta["radius_m"] = graph.radius();
  meta["points"] = graph.size();
  meta["directed_edges"] = edges.size();
  meta["config_hash"] = config_hash;
  meta["seed"] = seed;
  std::vector<std::string> nodes;
  nodes.reserve(graph.size());
  for (const auto& id : graph.ids()) nodes.push_back(id.str());
  meta["nodes"] = nodes;
  std::ofstream side(path.string() + ".json", std::ios::binary);
  side << meta.dump() << '\n';
}

NeighborGraph read_graph_csv(const std::filesystem::path& path) {
  std::ifstream side(path.string() + ".json");
  if (!side) throw Error("missing graph sidecar " + path.string() + ".json");
  nlohmann::json meta = nlohmann::json::parse(side);
  std::vector<BblKey> ids;
  for (const auto& s : meta.at("nodes")) ids.push_back(BblKey::parse(s.get<std::string>()));
  NeighborGraph graph(std::move(ids), meta.at("radius_m").get<double>());

  CsvTable t = read_csv(path, ',');
  auto src = t.column("src_bbl"), dst = t.column("dst_bbl"), dist = t.column("distance_m");
  for (const auto& row : t.rows) {
    auto i = graph.index_of(BblKey::parse(row[src]));
    auto j = graph.index_of(BblKey::parse(row[dst]));
    if (!i || !j) throw Error(path.string() + ": edge references unknown node");
    graph.mutable_neighbors(*i).push_back({static_cast<std::uint32_t>(*j), parse_double(row[dist])});
  }
  for (std::size_t i = 0; i < graph.size(); ++i) {
    auto& nb = graph.mutable_neighbors(i);
    std::sort(nb.begin(), nb.end(), [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
  }
  return graph;
}

}  // namespace splag
