#include "bridgesim/geometry.hpp"

#include <algorithm>
#include <cassert>

namespace bridgesim {

bool point_in_polygon(std::span<const Vec2> ring, const Vec2& p) {
  std::size_t n = ring.size();
  if (n >= 2 && ring.front() == ring.back()) --n;  // tolerate closed rings
  if (n < 3) return false;

  constexpr double kOnBoundary = 1e-18;  // squared distance
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = ring[i];
    const Vec2& b = ring[(i + 1) % n];
    if (point_segment_distance_sq(p, a, b) < kOnBoundary) return true;
  }

  // Crossing number, half-open edge rule.
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = ring[i];
    const Vec2& b = ring[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

bool ring_is_simple(std::span<const Vec2> ring) {
  std::size_t n = ring.size();
  if (n >= 2 && ring.front() == ring.back()) --n;
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = ring[i];
    const Vec2& b = ring[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      // Skip adjacent edges (they share an endpoint by construction).
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      const Vec2& c = ring[j];
      const Vec2& d = ring[(j + 1) % n];
      if (segments_intersect(a, b, c, d)) return false;
    }
  }
  return true;
}

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
  cum_.reserve(points_.size());
  double s = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (i > 0) s += distance(points_[i - 1], points_[i]);
    cum_.push_back(s);
  }
}

PolylineProjection Polyline::project(const Vec2& p) const {
  assert(points_.size() >= 2);
  PolylineProjection best;
  double best_d_sq = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Vec2& a = points_[i];
    const Vec2& b = points_[i + 1];
    const Vec2 ab = b - a;
    const double len_sq = ab.norm_sq();
    double t = len_sq > 0.0 ? (p - a).dot(ab) / len_sq : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 q = a + ab * t;
    const double d_sq = (p - q).norm_sq();
    if (d_sq < best_d_sq) {
      best_d_sq = d_sq;
      best.segment = i;
      best.arclength = cum_[i] + t * std::sqrt(len_sq);
      const double side = ab.cross(p - a);
      best.distance = std::sqrt(d_sq);
      best.signed_lateral = side >= 0.0 ? best.distance : -best.distance;
    }
  }
  return best;
}

Vec2 Polyline::point_at(double arclength) const {
  assert(!points_.empty());
  if (points_.size() == 1 || arclength <= 0.0) return points_.front();
  if (arclength >= length()) return points_.back();
  const auto it = std::upper_bound(cum_.begin(), cum_.end(), arclength);
  const std::size_t i = static_cast<std::size_t>(it - cum_.begin()) - 1;
  const double seg_len = cum_[i + 1] - cum_[i];
  const double t = seg_len > 0.0 ? (arclength - cum_[i]) / seg_len : 0.0;
  return points_[i] + (points_[i + 1] - points_[i]) * t;
}

double Polyline::segment_heading(std::size_t segment) const {
  assert(segment + 1 < points_.size());
  const Vec2 d = points_[segment + 1] - points_[segment];
  return std::atan2(d.y, d.x);
}

double Polyline::heading_at(double arclength) const {
  assert(points_.size() >= 2);
  if (arclength <= 0.0) return segment_heading(0);
  if (arclength >= length()) return segment_heading(points_.size() - 2);
  const auto it = std::upper_bound(cum_.begin(), cum_.end(), arclength);
  std::size_t i = static_cast<std::size_t>(it - cum_.begin()) - 1;
  i = std::min(i, points_.size() - 2);
  return segment_heading(i);
}

}  // namespace bridgesim
