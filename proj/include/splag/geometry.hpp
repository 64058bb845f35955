#pragma once

#include <span>
#include <vector>

namespace splag {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) { return a.x == b.x && a.y == b.y; }
};

inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

/// Convex hull in counter-clockwise order without collinear or repeated
/// vertices (Andrew's monotone chain). Returns 1 or 2 vertices for
/// degenerate inputs (single location, collinear set).
std::vector<Vec2> convex_hull(std::span<const Vec2> points);

/// Outer polygon approximation of the Minkowski sum of a convex hull with a
/// disk of the given radius. Corner arcs are replaced by tangent chords, so
/// the polygon contains the exact buffer and exceeds it by at most
/// `chord_tolerance`; each corner gets at least `min_chords` chords. A hull of
/// one vertex yields a circle, two vertices a capsule.
std::vector<Vec2> buffer_convex_hull(std::span<const Vec2> hull, double radius,
                                     double chord_tolerance = 0.009, int min_chords = 8);

/// Strictly convex CCW polygon with O(log n) containment queries.
class ConvexPolygon {
 public:
  ConvexPolygon() = default;
  explicit ConvexPolygon(std::vector<Vec2> ccw_vertices);

  /// Closed containment (boundary counts as inside, up to rounding).
  bool contains(Vec2 q) const;

  const std::vector<Vec2>& vertices() const { return v_; }
  Vec2 min_corner() const { return lo_; }
  Vec2 max_corner() const { return hi_; }

 private:
  std::vector<Vec2> v_;
  Vec2 lo_, hi_;
  double eps_ = 0.0;
};

/// Euclidean distance from q to the convex region spanned by hull (0 inside).
double distance_to_convex(Vec2 q, std::span<const Vec2> hull);

}  // namespace splag
