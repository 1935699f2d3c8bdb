#include <doctest.h>

#include <cmath>

#include "bridgesim/geometry.hpp"
#include "bridgesim/rng.hpp"

using namespace bridgesim;

namespace {

double deg(double d) { return d * kPi / 180.0; }

// Independent slerp oracle: interpolate between unit vectors and read the
// angle back.
double slerp_heading(double a0, double a1, double alpha) {
  const Vec2 u{std::cos(a0), std::sin(a0)};
  const Vec2 v{std::cos(a1), std::sin(a1)};
  const double omega = std::acos(std::clamp(u.dot(v), -1.0, 1.0));
  if (omega < 1e-12) return a0;
  const double s0 = std::sin((1.0 - alpha) * omega) / std::sin(omega);
  const double s1 = std::sin(alpha * omega) / std::sin(omega);
  const Vec2 w = u * s0 + v * s1;
  return std::atan2(w.y, w.x);
}

}  // namespace

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(3.0 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(0.5) == doctest::Approx(0.5));
  CHECK(wrap_angle(kPi + 0.1) == doctest::Approx(-kPi + 0.1));
  CounterRng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-50.0, 50.0);
    const double w = wrap_angle(a);
    CHECK(w > -kPi - 1e-15);
    CHECK(w <= kPi + 1e-15);
    CHECK(std::abs(std::remainder(w - a, kTwoPi)) < 1e-9);
  }
}

TEST_CASE("interpolate_heading crosses zero on the short arc") {
  CHECK(interpolate_heading(deg(350) - kTwoPi, deg(10), 0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(interpolate_heading(deg(-10), deg(10), 0.5) == doctest::Approx(0.0));
}

TEST_CASE("interpolate_heading identity") {
  for (const double theta : {-2.0, 0.0, 1.5, kPi}) {
    for (const double alpha : {0.0, 0.3, 1.0}) {
      CHECK(interpolate_heading(theta, theta, alpha) == doctest::Approx(theta));
    }
  }
}

TEST_CASE("interpolate_heading antipodal tie-break is counter-clockwise") {
  // (0 deg, 180 deg, 0.25) resolves to +45 deg.
  CHECK(interpolate_heading(0.0, kPi, 0.25) == doctest::Approx(kPi / 4.0));
  // Cross-check a non-tied case against the slerp oracle.
  const double got = interpolate_heading(0.3, 2.1, 0.25);
  CHECK(got == doctest::Approx(slerp_heading(0.3, 2.1, 0.25)).epsilon(1e-9));
}

TEST_CASE("interpolate_heading shortest-arc proportionality") {
  CounterRng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const double a0 = rng.uniform(-kPi, kPi);
    const double a1 = rng.uniform(-kPi, kPi);
    const double alpha = rng.next_double();
    const double r = interpolate_heading(a0, a1, alpha);
    const double full = std::abs(angle_diff(a1, a0));
    const double part = std::abs(angle_diff(r, a0));
    CHECK(std::abs(part - alpha * full) < 1e-12);
  }
}

TEST_CASE("frame transforms round-trip") {
  const Pose2 frame{{3.0, -2.0}, 0.7};
  const Vec2 p{5.0, 1.0};
  const Vec2 back = from_frame(frame, to_frame(frame, p));
  CHECK(back.x == doctest::Approx(p.x).epsilon(1e-12));
  CHECK(back.y == doctest::Approx(p.y).epsilon(1e-12));
}

TEST_CASE("oriented box overlap") {
  const OrientedBox a{{{0.0, 0.0}, 0.0}, 4.0, 2.0};
  const OrientedBox far{{{10.0, 0.0}, 0.0}, 4.0, 2.0};
  CHECK_FALSE(boxes_overlap(a, far));
  CHECK(boxes_overlap(a, a));
  const OrientedBox rotated{{{3.5, 0.0}, kPi / 4.0}, 4.0, 2.0};
  CHECK(boxes_overlap(a, rotated));
  // Diagonal corner proximity without overlap.
  const OrientedBox diag{{{4.1, 2.1}, 0.0}, 4.0, 2.0};
  CHECK_FALSE(boxes_overlap(a, diag));
}

TEST_CASE("point_in_polygon counts boundary as inside and handles concavity") {
  const std::vector<Vec2> square{{0, 0}, {4, 0}, {4, 4}, {0, 4}};
  CHECK(point_in_polygon(square, {2, 2}));
  CHECK(point_in_polygon(square, {0, 2}));   // on edge
  CHECK(point_in_polygon(square, {4, 4}));   // on corner
  CHECK_FALSE(point_in_polygon(square, {4.01, 2}));

  // Plus-shaped concave ring.
  const std::vector<Vec2> plus{{-1, -3}, {1, -3}, {1, -1}, {3, -1}, {3, 1},  {1, 1},
                               {1, 3},   {-1, 3}, {-1, 1}, {-3, 1}, {-3, -1}, {-1, -1}};
  CHECK(ring_is_simple(plus));
  CHECK(point_in_polygon(plus, {0, 0}));
  CHECK(point_in_polygon(plus, {2.5, 0}));
  CHECK_FALSE(point_in_polygon(plus, {2.5, 2.5}));
}

TEST_CASE("ring_is_simple rejects a bowtie") {
  const std::vector<Vec2> bowtie{{0, 0}, {2, 2}, {2, 0}, {0, 2}};
  CHECK_FALSE(ring_is_simple(bowtie));
}

TEST_CASE("polyline projection and arclength") {
  const Polyline line({{0, 0}, {10, 0}, {10, 10}});
  CHECK(line.length() == doctest::Approx(20.0));

  const auto p1 = line.project({5, 1});
  CHECK(p1.arclength == doctest::Approx(5.0));
  CHECK(p1.distance == doctest::Approx(1.0));
  CHECK(p1.signed_lateral == doctest::Approx(1.0));  // left of +x travel

  const auto p2 = line.project({5, -2});
  CHECK(p2.signed_lateral == doctest::Approx(-2.0));

  const auto p3 = line.project({11, 5});
  CHECK(p3.arclength == doctest::Approx(15.0));
  CHECK(p3.signed_lateral == doctest::Approx(-1.0));  // right of +y travel

  const Vec2 q = line.point_at(15.0);
  CHECK(q.x == doctest::Approx(10.0));
  CHECK(q.y == doctest::Approx(5.0));
  CHECK(line.heading_at(15.0) == doctest::Approx(kPi / 2.0));
}

TEST_CASE("counter rng is a pure function of seed and counter") {
  CounterRng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(CounterRng::value_at(42, 3) == CounterRng::value_at(42, 3));
  CHECK(CounterRng::value_at(42, 3) != CounterRng::value_at(43, 3));
  CounterRng c(1);
  for (int i = 0; i < 1000; ++i) {
    const double d = c.next_double();
    CHECK(d >= 0.0);
    CHECK(d < 1.0);
  }
}
