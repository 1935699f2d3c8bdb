#include <doctest.h>

#include <cmath>

#include "bridgesim/procgen.hpp"
#include "bridgesim/errors.hpp"
#include "bridgesim/scenario.hpp"

using namespace bridgesim;

TEST_CASE("straight single-lane scenario: ego cruises the route") {
  ProcGenConfig cfg;
  cfg.layout = ProcGenConfig::Layout::Straight;
  cfg.lane_count = 1;
  cfg.agent_count = 0;
  cfg.route_length = 100.0;
  cfg.ego_cruise_speed = 5.0;
  cfg.duration = 20.0;
  const ScenarioDescription s = generate_scenario(cfg, 1);

  validate_scenario(s);
  const Track& ego = s.ego_track();
  CHECK(s.step_count == 201);
  for (const TrackState& st : ego.states) CHECK(st.valid);
  const Vec2 start = ego.states.front().pose.position;
  const Vec2 end = ego.states.back().pose.position;
  CHECK(distance(start, end) == doctest::Approx(100.0).epsilon(1e-6));
  CHECK(std::abs(end.y - start.y) < 1e-6);  // along the x-axis
}

TEST_CASE("identical config and seed give byte-identical scenarios") {
  ProcGenConfig cfg;
  cfg.agent_count = 4;
  cfg.duration = 10.0;
  const std::string a = serialize_scenario(generate_scenario(cfg, 42));
  const std::string b = serialize_scenario(generate_scenario(cfg, 42));
  CHECK(a == b);
  const std::string c = serialize_scenario(generate_scenario(cfg, 43));
  CHECK(a != c);
}

TEST_CASE("generated agent logs never overlap (pairwise polygon oracle)") {
  ProcGenConfig cfg;
  cfg.layout = ProcGenConfig::Layout::Straight;
  cfg.lane_count = 1;
  cfg.agent_count = 3;
  cfg.duration = 12.0;
  const ScenarioDescription s = generate_scenario(cfg, 7);

  for (int t = 0; t < s.step_count; ++t) {
    std::vector<std::pair<OrientedBox, std::string>> boxes;
    for (const Track& track : s.tracks) {
      const TrackState& st = track.states[static_cast<std::size_t>(t)];
      if (!st.valid) continue;
      boxes.push_back({{st.pose, track.dims.length, track.dims.width}, track.object_id});
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      for (std::size_t j = i + 1; j < boxes.size(); ++j) {
        CHECK_FALSE(boxes_overlap(boxes[i].first, boxes[j].first));
      }
    }
  }
}

TEST_CASE("every layout validates and anchors the ego at the origin") {
  for (const auto layout : {ProcGenConfig::Layout::Straight, ProcGenConfig::Layout::Arc,
                            ProcGenConfig::Layout::Intersection}) {
    ProcGenConfig cfg;
    cfg.layout = layout;
    cfg.lane_count = layout == ProcGenConfig::Layout::Intersection ? 1 : 2;
    cfg.agent_count = 4;
    cfg.signalized = layout == ProcGenConfig::Layout::Intersection;
    cfg.route_length = 160.0;
    cfg.duration = 15.0;
    const ScenarioDescription s = generate_scenario(cfg, 11);
    validate_scenario(s);
    CHECK(s.ego_track().states.front().pose.position.norm() < 1e-9);
    if (cfg.signalized) {
      CHECK_FALSE(s.dynamic_states.empty());
      bool has_stop_line = false;
      for (const MapFeature& f : s.map_features) {
        if (f.kind == FeatureKind::StopLine) has_stop_line = true;
      }
      CHECK(has_stop_line);
    }
  }
}

TEST_CASE("arc layout stays within the curvature bound") {
  ProcGenConfig cfg;
  cfg.layout = ProcGenConfig::Layout::Arc;
  cfg.duration = 10.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ScenarioDescription s = generate_scenario(cfg, seed);
    const MapFeature* lane = s.find_feature("lane_0");
    REQUIRE(lane != nullptr);
    // Estimate curvature from heading change per arclength.
    const Polyline line(lane->polyline);
    const double total_turn =
        std::abs(angle_diff(line.segment_heading(line.size() - 2), line.segment_heading(0)));
    const double curvature = total_turn / line.length();
    CHECK(curvature <= 1.0 / 15.0 + 1e-6);
  }
}

TEST_CASE("generate_suite consistency and determinism") {
  ProcGenConfig cfg;
  cfg.agent_count = 2;
  cfg.duration = 8.0;
  const auto suite = generate_suite(cfg, 3, 100);
  REQUIRE(suite.size() == 3);
  CHECK(suite[0].id != suite[1].id);
  CHECK(suite[1].id != suite[2].id);
  CHECK(serialize_scenario(suite[0]) == serialize_scenario(generate_scenario(cfg, 100)));

  const auto again = generate_suite(cfg, 3, 100);
  for (int i = 0; i < 3; ++i) {
    CHECK(serialize_scenario(suite[static_cast<std::size_t>(i)]) ==
          serialize_scenario(again[static_cast<std::size_t>(i)]));
  }
  CHECK_THROWS_AS(generate_suite(cfg, 0, 1), ValidationError);
}

TEST_CASE("invalid configs are rejected") {
  ProcGenConfig cfg;
  cfg.route_length = -1.0;
  CHECK_THROWS_AS(generate_scenario(cfg, 1), ValidationError);
  ProcGenConfig odd;
  odd.duration = 1.03;  // not a multiple of dt
  CHECK_THROWS_AS(generate_scenario(odd, 1), ValidationError);
}

TEST_CASE("procgen config JSON round-trip") {
  ProcGenConfig cfg;
  cfg.layout = ProcGenConfig::Layout::Intersection;
  cfg.lane_count = 2;
  cfg.agent_count = 6;
  cfg.signalized = true;
  cfg.duration = 24.0;
  const ProcGenConfig back = procgen_config_from_json(procgen_config_to_json(cfg));
  CHECK(back.layout == cfg.layout);
  CHECK(back.lane_count == cfg.lane_count);
  CHECK(back.agent_count == cfg.agent_count);
  CHECK(back.signalized == cfg.signalized);
  CHECK(back.duration == doctest::Approx(cfg.duration));
}
