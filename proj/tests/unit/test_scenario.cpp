#include <doctest.h>

#include <cmath>

#include "bridgesim/errors.hpp"
#include "bridgesim/procgen.hpp"
#include "bridgesim/rng.hpp"
#include "bridgesim/scenario.hpp"

using namespace bridgesim;

namespace {

ScenarioDescription minimal_scenario() {
  ScenarioDescription s;
  s.id = "minimal";
  s.dt = 0.1;
  s.step_count = 5;
  s.ego_track_id = "ego";
  s.source = "fixture";

  MapFeature lane;
  lane.id = "lane_0";
  lane.kind = FeatureKind::LaneCenter;
  lane.polyline = {{-5.0, 0.0}, {50.0, 0.0}};
  lane.attributes.speed_limit = 10.0;
  s.map_features.push_back(lane);

  MapFeature ring;
  ring.id = "drivable";
  ring.kind = FeatureKind::DrivableArea;
  ring.polyline = {{-10.0, -3.0}, {60.0, -3.0}, {60.0, 3.0}, {-10.0, 3.0}};
  s.map_features.push_back(ring);

  Track ego;
  ego.object_id = "ego";
  ego.object_type = ObjectType::Ego;
  ego.dims = {4.6, 1.9, 1.6};
  for (int t = 0; t < 5; ++t) {
    TrackState st;
    st.valid = true;
    st.pose.position = {0.5 * t, 0.0};
    st.pose.heading = 0.0;
    st.velocity = {5.0, 0.0};
    ego.states.push_back(st);
  }
  s.tracks.push_back(ego);
  return s;
}

}  // namespace

TEST_CASE("serialize then parse round-trips exactly") {
  const ScenarioDescription s = minimal_scenario();
  const std::string bytes = serialize_scenario(s);
  const ScenarioDescription back = parse_scenario(bytes);
  CHECK(back == s);
}

TEST_CASE("serialization is deterministic") {
  const ScenarioDescription s = minimal_scenario();
  CHECK(serialize_scenario(s) == serialize_scenario(s));
}

TEST_CASE("scenario with no ego fails validation") {
  ScenarioDescription s = minimal_scenario();
  s.tracks.clear();
  CHECK_THROWS_AS(serialize_scenario(s), ValidationError);
}

TEST_CASE("truncated document fails to parse") {
  const std::string bytes = serialize_scenario(minimal_scenario());
  CHECK_THROWS_AS(parse_scenario(bytes.substr(0, bytes.size() / 2)), ParseError);
}

TEST_CASE("schema version mismatch is rejected") {
  std::string bytes = serialize_scenario(minimal_scenario());
  const auto pos = bytes.find("\"schema_version\":1");
  REQUIRE(pos != std::string::npos);
  bytes.replace(pos, 18, "\"schema_version\":9");
  CHECK_THROWS_AS(parse_scenario(bytes), ParseError);
}

TEST_CASE("heading 3*pi is normalized on load") {
  ScenarioDescription s = minimal_scenario();
  const std::string bytes = serialize_scenario(s);
  // Inject an out-of-range heading into the ego's first state.
  std::string doc = bytes;
  const auto pos = doc.find("\"heading\":0.0");
  REQUIRE(pos != std::string::npos);
  const double theta = 9.5;  // roughly 3*pi, clearly outside (-pi, pi]
  doc.replace(pos, 13, "\"heading\":9.5");
  const ScenarioDescription back = parse_scenario(doc);

  const double loaded = back.tracks[0].states[0].pose.heading;
  CHECK(loaded > -kPi);
  CHECK(loaded <= kPi);
  // Oracle: theta - 2*pi*round(theta / (2*pi)), adjusted to (-pi, pi].
  double oracle = theta - kTwoPi * std::round(theta / kTwoPi);
  if (oracle <= -kPi) oracle += kTwoPi;
  CHECK(loaded == doctest::Approx(oracle).epsilon(1e-12));
  // Every other state stays untouched.
  CHECK(back.tracks[0].states[1].pose.heading == 0.0);
}

TEST_CASE("resample_track linear positions 2Hz to 10Hz") {
  Track t;
  t.object_id = "a";
  t.object_type = ObjectType::Vehicle;
  t.dims = {4.0, 2.0, 1.5};
  TrackState s0, s1;
  s0.valid = s1.valid = true;
  s0.pose.position = {0.0, 0.0};
  s1.pose.position = {1.0, 0.0};
  s0.velocity = s1.velocity = {2.0, 0.0};
  t.states = {s0, s1};

  const Track r = resample_track(t, 0.5, 0.1);
  REQUIRE(r.states.size() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(r.states[i].valid);
    CHECK(r.states[i].pose.position.x == doctest::Approx(0.2 * i).epsilon(1e-12));
  }
}

TEST_CASE("resample_track headings take the short arc through zero") {
  Track t;
  t.object_id = "a";
  t.object_type = ObjectType::Vehicle;
  t.dims = {4.0, 2.0, 1.5};
  TrackState s0, s1;
  s0.valid = s1.valid = true;
  s0.pose.heading = 350.0 * kPi / 180.0 - kTwoPi;
  s1.pose.heading = 10.0 * kPi / 180.0;
  t.states = {s0, s1};

  const Track r = resample_track(t, 0.5, 0.1);
  for (const TrackState& st : r.states) {
    CHECK(std::abs(st.pose.heading) < 12.0 * kPi / 180.0);  // never near pi
  }
}

TEST_CASE("resample_track propagates invalidity over (t0, t1]") {
  Track t;
  t.object_id = "a";
  t.object_type = ObjectType::Vehicle;
  t.dims = {4.0, 2.0, 1.5};
  TrackState valid, invalid;
  valid.valid = true;
  invalid.valid = false;
  t.states = {valid, invalid, valid};  // invalid at source index 1

  const Track r = resample_track(t, 0.5, 0.1);
  REQUIRE(r.states.size() == 11);
  // Oracle: target samples in (0, 0.5] are invalid; (0.5, 1.0) invalid too
  // (interpolating against the invalid endpoint); 1.0 valid again.
  CHECK(r.states[0].valid);
  for (int i = 1; i <= 9; ++i) CHECK_FALSE(r.states[i].valid);
  CHECK(r.states[10].valid);
}

TEST_CASE("resample_track identity at equal rates") {
  const ScenarioDescription s = minimal_scenario();
  const Track& ego = s.tracks.front();
  const Track r = resample_track(ego, 0.1, 0.1);
  REQUIRE(r.states.size() == ego.states.size());
  for (std::size_t i = 0; i < r.states.size(); ++i) CHECK(r.states[i] == ego.states[i]);
}

TEST_CASE("resample_track needs two valid states") {
  Track t;
  t.object_id = "a";
  t.dims = {4.0, 2.0, 1.5};
  TrackState one;
  one.valid = true;
  t.states = {one};
  CHECK_THROWS_AS(resample_track(t, 0.1, 0.1), SimulationError);
}

TEST_CASE("normalize_chirality flips left-handed data and is an involution") {
  ScenarioDescription s = minimal_scenario();
  s.tracks[0].states[0].pose.position = {1.0, 2.0};
  s.tracks[0].states[0].pose.heading = kPi / 4.0;

  const ScenarioDescription right = normalize_chirality(s, Handedness::Left);
  CHECK(right.tracks[0].states[0].pose.position.y == doctest::Approx(-2.0));
  CHECK(right.tracks[0].states[0].pose.heading == doctest::Approx(-kPi / 4.0));

  // Right-handed input is untouched.
  const ScenarioDescription same = normalize_chirality(s, Handedness::Right);
  CHECK(same == s);

  // Applying the flip twice restores the original.
  const ScenarioDescription twice = normalize_chirality(right, Handedness::Left);
  CHECK(twice.tracks[0].states[0].pose.position.y == doctest::Approx(2.0));
  CHECK(twice.tracks[0].states[0].pose.heading == doctest::Approx(kPi / 4.0));
}

TEST_CASE("normalize_chirality preserves pairwise distances") {
  const ScenarioDescription s = generate_scenario(ProcGenConfig{}, 5);
  const ScenarioDescription flipped = normalize_chirality(s, Handedness::Left);
  const auto& a = s.map_features.front().polyline;
  const auto& b = flipped.map_features.front().polyline;
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 1; i < a.size(); ++i) {
    CHECK(distance(a[i - 1], a[i]) == doctest::Approx(distance(b[i - 1], b[i])).epsilon(1e-9));
  }
}

TEST_CASE("anchor_scenario shifts the world to the ego origin") {
  ScenarioDescription s = minimal_scenario();
  for (Track& t : s.tracks) {
    for (TrackState& st : t.states) st.pose.position += Vec2{1000.0, 2000.0};
  }
  for (MapFeature& f : s.map_features) {
    for (Vec2& p : f.polyline) p += Vec2{1000.0, 2000.0};
  }
  const ScenarioDescription anchored = anchor_scenario(s);
  CHECK(anchored.tracks[0].states[0].pose.position.norm() < 1e-9);
  CHECK(anchored.anchor.x == doctest::Approx(1000.0));
  CHECK(anchored.anchor.y == doctest::Approx(2000.0));
  CHECK(anchored.map_features[0].polyline[0].x == doctest::Approx(-5.0));  // back at its original spot

  // Idempotent.
  const ScenarioDescription again = anchor_scenario(anchored);
  CHECK(again == anchored);

  // Distance preserving.
  const auto& before = s.map_features[0].polyline;
  const auto& after = anchored.map_features[0].polyline;
  for (std::size_t i = 1; i < before.size(); ++i) {
    CHECK(distance(before[0], before[i]) ==
          doctest::Approx(distance(after[0], after[i])).epsilon(1e-9));
  }
}

TEST_CASE("anchoring fails when the ego is invalid at step 0") {
  ScenarioDescription s = minimal_scenario();
  s.tracks[0].states[0].valid = false;
  CHECK_THROWS_AS(anchor_scenario(s), SimulationError);
}

TEST_CASE("query_lane basics and sign convention") {
  const ScenarioDescription s = minimal_scenario();
  const auto on_line = query_lane(s.map_features, {10.0, 0.0});
  CHECK(on_line.lane_id == "lane_0");
  CHECK(on_line.lateral_offset == doctest::Approx(0.0));
  CHECK(on_line.lane_heading == doctest::Approx(0.0));
  CHECK(on_line.arclength == doctest::Approx(15.0));  // lane starts at x=-5

  const auto left = query_lane(s.map_features, {10.0, 1.0});
  CHECK(left.lateral_offset == doctest::Approx(1.0));
}

TEST_CASE("query_lane picks the nearest of two parallel lanes") {
  ScenarioDescription s = minimal_scenario();
  MapFeature lane_b;
  lane_b.id = "lane_1";
  lane_b.kind = FeatureKind::LaneCenter;
  lane_b.polyline = {{-5.0, 4.0}, {50.0, 4.0}};
  s.map_features.push_back(lane_b);

  // Brute-force oracle over every segment of every lane.
  const Vec2 p{10.0, 1.5};
  double best = 1e18;
  std::string best_id;
  for (const MapFeature& f : s.map_features) {
    if (f.kind != FeatureKind::LaneCenter) continue;
    for (std::size_t i = 0; i + 1 < f.polyline.size(); ++i) {
      const double d = std::sqrt(point_segment_distance_sq(p, f.polyline[i], f.polyline[i + 1]));
      if (d < best) {
        best = d;
        best_id = f.id;
      }
    }
  }
  CHECK(best_id == "lane_0");
  CHECK(query_lane(s.map_features, p).lane_id == best_id);
}

TEST_CASE("query_lane with no lanes is an error") {
  ScenarioDescription s = minimal_scenario();
  s.map_features.erase(s.map_features.begin());
  CHECK_THROWS_AS(query_lane(s.map_features, {0.0, 0.0}), SimulationError);
}

TEST_CASE("round-trip property over procedurally generated scenarios") {
  ProcGenConfig cfg;
  cfg.agent_count = 3;
  cfg.duration = 10.0;
  cfg.route_length = 120.0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    cfg.layout = seed % 2 == 0 ? ProcGenConfig::Layout::Straight : ProcGenConfig::Layout::Arc;
    const ScenarioDescription s = generate_scenario(cfg, seed);
    const ScenarioDescription back = parse_scenario(serialize_scenario(s));
    CHECK(back == s);
  }
}
