#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace bridgesim {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2& o) const = default;

  constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  constexpr double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  constexpr double norm_sq() const { return x * x + y * y; }
  Vec2 normalized() const {
    const double n = norm();
    return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
  }
  Vec2 rotated(double angle) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }
  // Left-hand normal (90 deg counter-clockwise).
  constexpr Vec2 perp() const { return {-y, x}; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

constexpr Vec2 operator*(double s, const Vec2& v) { return {v.x * s, v.y * s}; }

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Normalizes an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, kTwoPi);  // [-pi, pi]
  if (r <= -kPi) r += kTwoPi;
  return r;
}

/// Shortest signed angular difference b - a, in (-pi, pi]. The antipodal
/// case (|b - a| == pi) resolves to +pi, i.e. the counter-clockwise arc.
inline double angle_diff(double b, double a) { return wrap_angle(b - a); }

/// Interpolates along the shortest angular arc from a0 to a1.
/// alpha in [0, 1]; result normalized to (-pi, pi].
inline double interpolate_heading(double a0, double a1, double alpha) {
  return wrap_angle(a0 + alpha * angle_diff(a1, a0));
}

struct Pose2 {
  Vec2 position;
  double heading = 0.0;  // radians, (-pi, pi]

  constexpr bool operator==(const Pose2& o) const = default;
};

/// Maps a point expressed in the frame of `frame` into world coordinates.
inline Vec2 from_frame(const Pose2& frame, const Vec2& local) {
  return frame.position + local.rotated(frame.heading);
}

/// Maps a world point into the frame of `frame` (x forward, y left).
inline Vec2 to_frame(const Pose2& frame, const Vec2& world) {
  return (world - frame.position).rotated(-frame.heading);
}

// ---------------------------------------------------------------------------
// Oriented boxes (vehicle footprints)
// ---------------------------------------------------------------------------

struct OrientedBox {
  Pose2 pose;
  double length = 0.0;  // extent along heading
  double width = 0.0;   // extent across heading

  std::array<Vec2, 4> corners() const {
    const double hl = 0.5 * length, hw = 0.5 * width;
    return {from_frame(pose, {hl, hw}), from_frame(pose, {hl, -hw}),
            from_frame(pose, {-hl, -hw}), from_frame(pose, {-hl, hw})};
  }

  // Half-extent of the box projected onto a unit direction.
  double support(const Vec2& dir) const {
    const Vec2 ax = Vec2{1.0, 0.0}.rotated(pose.heading);
    const Vec2 ay = ax.perp();
    return 0.5 * length * std::abs(dir.dot(ax)) + 0.5 * width * std::abs(dir.dot(ay));
  }
};

/// Exact oriented-rectangle overlap via the separating-axis test.
/// Touching boxes count as overlapping.
inline bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const Vec2 d = b.pose.position - a.pose.position;
  const Vec2 axes[4] = {
      Vec2{1.0, 0.0}.rotated(a.pose.heading), Vec2{0.0, 1.0}.rotated(a.pose.heading),
      Vec2{1.0, 0.0}.rotated(b.pose.heading), Vec2{0.0, 1.0}.rotated(b.pose.heading)};
  for (const Vec2& axis : axes) {
    if (std::abs(d.dot(axis)) > a.support(axis) + b.support(axis)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Segments and polygons
// ---------------------------------------------------------------------------

/// Squared distance from p to segment [a, b].
inline double point_segment_distance_sq(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len_sq = ab.norm_sq();
  double t = len_sq > 0.0 ? (p - a).dot(ab) / len_sq : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + ab * t)).norm_sq();
}

/// Inclusive segment intersection (shared endpoints and collinear overlap count).
inline bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    const double v = (q - p).cross(r - p);
    if (v > 1e-12) return 1;
    if (v < -1e-12) return -1;
    return 0;
  };
  const int o1 = orient(a, b, c), o2 = orient(a, b, d);
  const int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  const auto on_segment = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return std::min(p.x, r.x) - 1e-12 <= q.x && q.x <= std::max(p.x, r.x) + 1e-12 &&
           std::min(p.y, r.y) - 1e-12 <= q.y && q.y <= std::max(p.y, r.y) + 1e-12;
  };
  if (o1 == 0 && on_segment(a, c, b)) return true;
  if (o2 == 0 && on_segment(a, d, b)) return true;
  if (o3 == 0 && on_segment(c, a, d)) return true;
  if (o4 == 0 && on_segment(c, b, d)) return true;
  return false;
}

/// Point-in-polygon with points on the boundary counted inside.
/// Works for simple polygons, convex or concave; the ring may be open or
/// explicitly closed.
bool point_in_polygon(std::span<const Vec2> ring, const Vec2& p);

/// True when the closed ring has no self-intersections between
/// non-adjacent edges.
bool ring_is_simple(std::span<const Vec2> ring);

// ---------------------------------------------------------------------------
// Polylines
// ---------------------------------------------------------------------------

struct PolylineProjection {
  std::size_t segment = 0;     // index of the nearest segment
  double arclength = 0.0;      // arclength of the projected point
  double distance = 0.0;       // unsigned distance to the polyline
  double signed_lateral = 0.0; // positive to the left of travel direction
};

/// Immutable 2D polyline with cached cumulative arclengths.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points);

  const std::vector<Vec2>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double length() const { return cum_.empty() ? 0.0 : cum_.back(); }
  double arclength_at(std::size_t i) const { return cum_[i]; }

  PolylineProjection project(const Vec2& p) const;
  Vec2 point_at(double arclength) const;
  /// Tangent heading at the given arclength (heading of the containing segment).
  double heading_at(double arclength) const;
  double segment_heading(std::size_t segment) const;

 private:
  std::vector<Vec2> points_;
  std::vector<double> cum_;
};

}  // namespace bridgesim
