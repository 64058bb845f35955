#include "splag/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "splag/common.hpp"

namespace splag {

std::vector<Vec2> convex_hull(std::span<const Vec2> points) {
  std::vector<Vec2> p(points.begin(), points.end());
  std::sort(p.begin(), p.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  p.erase(std::unique(p.begin(), p.end()), p.end());
  if (p.size() <= 2) return p;

  std::vector<Vec2> hull(2 * p.size());
  std::size_t k = 0;
  for (const Vec2& q : p) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], q - hull[k - 2]) <= 0) --k;
    hull[k++] = q;
  }
  for (std::size_t i = p.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 1] - hull[k - 2], p[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = p[i];
  }
  hull.resize(k - 1);
  return hull;
}

namespace {

Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }

Vec2 outward_normal(Vec2 edge) {
  double len = std::hypot(edge.x, edge.y);
  return {edge.y / len, -edge.x / len};
}

/// Tangent-chord vertices for the arc [a0, a0 + sweep] around center.
void append_arc(std::vector<Vec2>& out, Vec2 center, double radius, double a0, double sweep,
                double max_step, int min_chords) {
  int chords = std::max(min_chords, static_cast<int>(std::ceil(sweep / max_step)));
  double step = sweep / chords;
  double r = radius / std::cos(step / 2.0);
  for (int j = 0; j < chords; ++j) out.push_back(center + r * unit(a0 + (j + 0.5) * step));
}

}  // namespace

std::vector<Vec2> buffer_convex_hull(std::span<const Vec2> hull, double radius, double chord_tolerance,
                                     int min_chords) {
  if (!(radius > 0.0)) throw Error("buffer radius must be positive");
  if (hull.empty()) return {};
  // Slight outward inflation keeps boundary points of the exact buffer inside
  // under rounding.
  double r = radius + std::max(1e-6, radius * 1e-9);
  double max_step = 2.0 * std::acos(radius / (radius + chord_tolerance));
  constexpr double two_pi = 2.0 * std::numbers::pi;

  std::vector<Vec2> out;
  const std::size_t k = hull.size();
  if (k == 1) {
    append_arc(out, hull[0], r, 0.0, two_pi, max_step, min_chords);
    return out;
  }
  for (std::size_t i = 0; i < k; ++i) {
    Vec2 prev = hull[(i + k - 1) % k];
    Vec2 cur = hull[i];
    Vec2 next = hull[(i + 1) % k];
    Vec2 n_in = outward_normal(cur - prev);
    Vec2 n_out = outward_normal(next - cur);
    double a0 = std::atan2(n_in.y, n_in.x);
    double sweep = std::atan2(n_out.y, n_out.x) - a0;
    while (sweep <= 0.0) sweep += two_pi;
    while (sweep > two_pi) sweep -= two_pi;
    append_arc(out, cur, r, a0, sweep, max_step, min_chords);
  }
  return out;
}

ConvexPolygon::ConvexPolygon(std::vector<Vec2> ccw_vertices) : v_(std::move(ccw_vertices)) {
  if (v_.size() < 3) throw Error("convex polygon needs at least 3 vertices");
  lo_ = hi_ = v_.front();
  for (Vec2 p : v_) {
    lo_ = {std::min(lo_.x, p.x), std::min(lo_.y, p.y)};
    hi_ = {std::max(hi_.x, p.x), std::max(hi_.y, p.y)};
  }
  double extent = std::max(hi_.x - lo_.x, hi_.y - lo_.y);
  eps_ = extent * extent * 1e-14;
}

bool ConvexPolygon::contains(Vec2 q) const {
  if (q.x < lo_.x || q.x > hi_.x || q.y < lo_.y || q.y > hi_.y) return false;
  const Vec2 o = v_[0];
  const Vec2 d = q - o;
  const std::size_t n = v_.size();
  if (cross(v_[1] - o, d) < -eps_ || cross(v_[n - 1] - o, d) > eps_) return false;
  std::size_t lo = 1, hi = n - 1;
  while (hi - lo > 1) {
    std::size_t mid = (lo + hi) / 2;
    if (cross(v_[mid] - o, d) >= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return cross(v_[hi] - v_[lo], q - v_[lo]) >= -eps_;
}

namespace {

double segment_distance(Vec2 q, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? std::clamp(dot(q - a, ab) / len2, 0.0, 1.0) : 0.0;
  Vec2 c = a + t * ab;
  return std::hypot(q.x - c.x, q.y - c.y);
}

}  // namespace

double distance_to_convex(Vec2 q, std::span<const Vec2> hull) {
  if (hull.empty()) throw Error("empty hull");
  if (hull.size() == 1) return std::hypot(q.x - hull[0].x, q.y - hull[0].y);
  if (hull.size() == 2) return segment_distance(q, hull[0], hull[1]);
  bool inside = true;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < hull.size(); ++i) {
    Vec2 a = hull[i], b = hull[(i + 1) % hull.size()];
    if (cross(b - a, q - a) < 0.0) inside = false;
    best = std::min(best, segment_distance(q, a, b));
  }
  return inside ? 0.0 : best;
}

}  // namespace splag
