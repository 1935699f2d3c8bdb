#include "bridgesim/procgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bridgesim/errors.hpp"
#include "bridgesim/geometry.hpp"
#include "bridgesim/rng.hpp"
#include "bridgesim/traffic.hpp"

namespace bridgesim {

std::string to_string(ProcGenConfig::Layout layout) {
  switch (layout) {
    case ProcGenConfig::Layout::Straight: return "straight";
    case ProcGenConfig::Layout::Arc: return "arc";
    case ProcGenConfig::Layout::Intersection: return "intersection";
  }
  return "unknown";
}

ProcGenConfig::Layout layout_from_string(const std::string& s) {
  if (s == "straight") return ProcGenConfig::Layout::Straight;
  if (s == "arc") return ProcGenConfig::Layout::Arc;
  if (s == "intersection") return ProcGenConfig::Layout::Intersection;
  throw ValidationError("unknown procgen layout: " + s);
}

namespace {

constexpr double kSampleStep = 2.0;     // m between generated polyline points
constexpr double kLaneOverrun = 40.0;   // m of lane geometry beyond the route
constexpr double kLaneLeadIn = 15.0;    // m of lane geometry before the route
constexpr double kRingMargin = 1.0;     // m of drivable area beyond boundaries
constexpr double kEndcapMargin = 10.0;  // m of drivable area beyond lane ends
constexpr int kMaxAttempts = 20;

constexpr double kEgoLength = 4.6;
constexpr double kEgoWidth = 1.9;
constexpr double kEgoHeight = 1.6;

// Signal phase pattern, 22 s period: the priority road runs GO 8 s / WAIT 2 s
// / STOP 12 s; the crossing road gets GO 12..18 with 2 s clearance on both
// sides.
constexpr double kPhasePeriod = 22.0;

Signal priority_signal(double t) {
  const double u = t - kPhasePeriod * std::floor(t / kPhasePeriod);
  if (u < 8.0) return Signal::GO;
  if (u < 10.0) return Signal::WAIT;
  return Signal::STOP;
}

Signal crossing_signal(double t) {
  const double u = t - kPhasePeriod * std::floor(t / kPhasePeriod);
  if (u < 12.0) return Signal::STOP;
  if (u < 18.0) return Signal::GO;
  if (u < 20.0) return Signal::WAIT;
  return Signal::STOP;
}

enum class Road { Priority, Crossing };

// One generated lane: geometry plus everything the log rollout needs.
struct GenLane {
  std::string id;
  Polyline line;
  Road road = Road::Priority;
  double speed_limit = 10.0;
  double stop_s = -1.0;  // arclength of the stop line on this lane, <0 = none
};

Vec2 lane_point(const GenLane& lane, double s) {
  const Polyline& l = lane.line;
  if (s < 0.0) {
    const double h = l.segment_heading(0);
    return l.points().front() + Vec2{std::cos(h), std::sin(h)} * s;
  }
  if (s > l.length()) {
    const double h = l.segment_heading(l.size() - 2);
    return l.points().back() + Vec2{std::cos(h), std::sin(h)} * (s - l.length());
  }
  return l.point_at(s);
}

double lane_heading(const GenLane& lane, double s) {
  return lane.line.heading_at(std::clamp(s, 0.0, lane.line.length()));
}

struct SimVehicle {
  std::string id;
  ObjectType type = ObjectType::Vehicle;
  Dims dims;
  int lane = 0;
  double s = 0.0;        // arclength on the lane (0 = route start)
  double speed = 0.0;
  double desired = 10.0;
  bool is_ego = false;
  std::vector<TrackState> states;
};

struct GenWorld {
  std::vector<GenLane> lanes;
  std::vector<SimVehicle> vehicles;
  double phase_offset = 0.0;  // added to sim time before the phase pattern
  bool signalized = false;
};

Signal signal_for(const GenWorld& world, const GenLane& lane, double t) {
  if (!world.signalized || lane.stop_s < 0.0) return Signal::GO;
  const double u = t + world.phase_offset;
  return lane.road == Road::Priority ? priority_signal(u) : crossing_signal(u);
}

TrackState state_of(const GenWorld& world, const SimVehicle& v) {
  const GenLane& lane = world.lanes[static_cast<std::size_t>(v.lane)];
  TrackState st;
  st.valid = true;
  const double heading = lane_heading(lane, v.s);
  st.pose.position = lane_point(lane, v.s);
  st.pose.heading = wrap_angle(heading);
  st.velocity = Vec2{std::cos(heading), std::sin(heading)} * v.speed;
  return st;
}

// Rolls every vehicle (ego included) forward with IDM car-following: same-lane
// leaders, stop lines under STOP/WAIT as stationary leaders.
void roll_logs(GenWorld& world, int steps, double dt) {
  IdmParams base;
  for (int step = 0; step < steps; ++step) {
    const double t = step * dt;
    for (SimVehicle& v : world.vehicles) v.states.push_back(state_of(world, v));

    std::vector<double> next_speed(world.vehicles.size());
    std::vector<double> next_s(world.vehicles.size());
    for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
      const SimVehicle& v = world.vehicles[i];
      const GenLane& lane = world.lanes[static_cast<std::size_t>(v.lane)];

      double leader_gap = std::numeric_limits<double>::infinity();
      double leader_speed = 0.0;
      for (std::size_t j = 0; j < world.vehicles.size(); ++j) {
        if (j == i || world.vehicles[j].lane != v.lane) continue;
        const double ds = world.vehicles[j].s - v.s;
        if (ds <= 0.0 || ds > 100.0) continue;
        const double gap = ds - 0.5 * v.dims.length - 0.5 * world.vehicles[j].dims.length;
        if (gap < leader_gap) {
          leader_gap = gap;
          leader_speed = world.vehicles[j].speed;
        }
      }
      if (signal_for(world, lane, t) != Signal::GO) {
        const double ds = lane.stop_s - v.s;
        if (ds > 0.0 && ds < 100.0) {
          const double gap = ds - 0.5 * v.dims.length;
          if (gap < leader_gap) {
            leader_gap = gap;
            leader_speed = 0.0;
          }
        }
      }

      IdmParams p = base;
      p.v0 = v.desired;
      double accel;
      if (std::isfinite(leader_gap)) {
        accel = idm_accel(p, v.speed, std::max(leader_gap, 0.05), v.speed - leader_speed);
      } else {
        accel = idm_accel(p, v.speed, std::numeric_limits<double>::infinity(), 0.0);
      }
      next_speed[i] = std::max(0.0, v.speed + accel * dt);
      next_s[i] = v.s + 0.5 * (v.speed + next_speed[i]) * dt;
    }
    for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
      world.vehicles[i].speed = next_speed[i];
      world.vehicles[i].s = next_s[i];
    }
  }
}

bool logs_collision_free(const GenWorld& world, int steps) {
  for (int step = 0; step < steps; ++step) {
    for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
      const TrackState& a = world.vehicles[i].states[static_cast<std::size_t>(step)];
      const OrientedBox box_a{a.pose, world.vehicles[i].dims.length, world.vehicles[i].dims.width};
      for (std::size_t j = i + 1; j < world.vehicles.size(); ++j) {
        const TrackState& b = world.vehicles[j].states[static_cast<std::size_t>(step)];
        const OrientedBox box_b{b.pose, world.vehicles[j].dims.length,
                                world.vehicles[j].dims.width};
        if (boxes_overlap(box_a, box_b)) return false;
      }
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Geometry builders
// ---------------------------------------------------------------------------

// Centerline of an arc (or straight when curvature == 0) offset `lateral` to
// the left, starting at `start_s` relative to the route origin.
std::vector<Vec2> sampled_centerline(double curvature, double lateral, double start_s,
                                     double end_s) {
  std::vector<Vec2> pts;
  const int n = std::max(2, static_cast<int>(std::ceil((end_s - start_s) / kSampleStep)) + 1);
  for (int i = 0; i < n; ++i) {
    const double s = start_s + (end_s - start_s) * static_cast<double>(i) / (n - 1);
    double heading;
    Vec2 base;
    if (std::abs(curvature) < 1e-12) {
      heading = 0.0;
      base = {s, 0.0};
    } else {
      heading = s * curvature;
      base = {std::sin(heading) / curvature, (1.0 - std::cos(heading)) / curvature};
    }
    const Vec2 left{-std::sin(heading), std::cos(heading)};
    pts.push_back(base + left * lateral);
  }
  return pts;
}

void add_linear_road(ScenarioDescription& scenario, GenWorld& world, const ProcGenConfig& cfg,
                     double curvature) {
  const double start_s = -kLaneLeadIn;
  const double end_s = cfg.route_length + kLaneOverrun;
  const double w = cfg.lane_width;

  for (int i = 0; i < cfg.lane_count; ++i) {
    MapFeature f;
    f.id = "lane_" + std::to_string(i);
    f.kind = FeatureKind::LaneCenter;
    f.polyline = sampled_centerline(curvature, i * w, start_s, end_s);
    f.attributes.speed_limit = cfg.ego_cruise_speed;
    scenario.map_features.push_back(f);

    GenLane lane;
    lane.id = f.id;
    // The rollout measures arclength from the route origin, so rebuild the
    // polyline from s=0.
    lane.line = Polyline(sampled_centerline(curvature, i * w, 0.0, end_s));
    lane.road = Road::Priority;
    lane.speed_limit = cfg.ego_cruise_speed;
    world.lanes.push_back(std::move(lane));
  }

  const double right_edge = -0.5 * w;
  const double left_edge = (cfg.lane_count - 1) * w + 0.5 * w;
  MapFeature right;
  right.id = "boundary_right";
  right.kind = FeatureKind::RoadBoundary;
  right.polyline = sampled_centerline(curvature, right_edge, start_s, end_s);
  scenario.map_features.push_back(right);
  MapFeature left;
  left.id = "boundary_left";
  left.kind = FeatureKind::RoadBoundary;
  left.polyline = sampled_centerline(curvature, left_edge, start_s, end_s);
  scenario.map_features.push_back(left);

  MapFeature ring;
  ring.id = "drivable";
  ring.kind = FeatureKind::DrivableArea;
  const auto lo = sampled_centerline(curvature, right_edge - kRingMargin,
                                     start_s - kEndcapMargin, end_s + kEndcapMargin);
  auto hi = sampled_centerline(curvature, left_edge + kRingMargin, start_s - kEndcapMargin,
                               end_s + kEndcapMargin);
  ring.polyline = lo;
  std::reverse(hi.begin(), hi.end());
  ring.polyline.insert(ring.polyline.end(), hi.begin(), hi.end());
  scenario.map_features.push_back(ring);
}

void add_signal_features(ScenarioDescription& scenario, GenWorld& world,
                         const ProcGenConfig& cfg, double stop_s, double curvature) {
  // One stop line per priority lane, perpendicular across the lane.
  for (int i = 0; i < cfg.lane_count; ++i) {
    GenLane& lane = world.lanes[static_cast<std::size_t>(i)];
    lane.stop_s = stop_s;
    const Vec2 center = lane_point(lane, stop_s);
    const double heading = lane_heading(lane, stop_s);
    const Vec2 left{-std::sin(heading), std::cos(heading)};
    MapFeature f;
    f.id = "stop_line_" + std::to_string(i);
    f.kind = FeatureKind::StopLine;
    f.polyline = {center - left * (0.5 * cfg.lane_width), center + left * (0.5 * cfg.lane_width)};
    f.attributes.gated_lane = lane.id;
    scenario.map_features.push_back(f);
  }
  (void)curvature;
}

}  // namespace

ScenarioDescription generate_scenario(const ProcGenConfig& cfg, std::uint64_t seed) {
  if (cfg.lane_count < 1 || cfg.lane_width <= 0.0 || cfg.route_length <= 0.0 ||
      cfg.agent_count < 0 || cfg.duration <= 0.0 || cfg.dt <= 0.0) {
    throw ValidationError("generate_scenario: invalid config");
  }
  const double steps_f = cfg.duration / cfg.dt;
  if (std::abs(steps_f - std::lround(steps_f)) > 1e-6) {
    throw ValidationError("generate_scenario: duration must be an integer multiple of dt");
  }
  const int steps = static_cast<int>(std::lround(steps_f)) + 1;

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    CounterRng rng(CounterRng::derive(seed, static_cast<std::uint64_t>(attempt)));

    ScenarioDescription scenario;
    {
      std::ostringstream id;
      id << "pg-" << to_string(cfg.layout) << "-" << std::hex << seed;
      scenario.id = id.str();
    }
    scenario.dt = cfg.dt;
    scenario.step_count = steps;
    scenario.ego_track_id = "ego";
    scenario.source = "procgen";
    scenario.handedness = Handedness::Right;

    GenWorld world;
    world.signalized = cfg.signalized;

    double curvature = 0.0;
    if (cfg.layout == ProcGenConfig::Layout::Arc) {
      // Cap the total turn so the road (with lead-in, overrun, and ring
      // endcaps) can never loop back onto itself.
      const double total_len =
          kLaneLeadIn + cfg.route_length + kLaneOverrun + 2.0 * kEndcapMargin;
      const double magnitude = std::min(1.0 / 20.0, rng.uniform(0.8, 1.8) / total_len);
      curvature = rng.bernoulli(0.5) ? magnitude : -magnitude;
    }
    add_linear_road(scenario, world, cfg, curvature);

    const double w = cfg.lane_width;
    int crossing_first_lane = -1;
    if (cfg.layout == ProcGenConfig::Layout::Intersection) {
      // Crossing one-way road along +y through the middle of the route.
      const double cross_x = 0.5 * cfg.route_length;
      const double half_span = 0.5 * cfg.route_length + kLaneOverrun;
      crossing_first_lane = static_cast<int>(world.lanes.size());
      for (int i = 0; i < cfg.lane_count; ++i) {
        MapFeature f;
        f.id = "cross_lane_" + std::to_string(i);
        f.kind = FeatureKind::LaneCenter;
        std::vector<Vec2> pts;
        const int n = static_cast<int>(std::ceil(2.0 * half_span / kSampleStep)) + 1;
        for (int k = 0; k < n; ++k) {
          const double y = -half_span + 2.0 * half_span * static_cast<double>(k) / (n - 1);
          pts.push_back({cross_x + i * w, y});
        }
        f.polyline = pts;
        f.attributes.speed_limit = cfg.ego_cruise_speed;
        scenario.map_features.push_back(f);

        GenLane lane;
        lane.id = f.id;
        lane.line = Polyline(pts);
        lane.road = Road::Crossing;
        lane.speed_limit = cfg.ego_cruise_speed;
        world.lanes.push_back(std::move(lane));
      }
      // Drivable cross bar over the crossing road.
      MapFeature bar;
      bar.id = "drivable_cross";
      bar.kind = FeatureKind::DrivableArea;
      const double x0 = cross_x - 0.5 * w - kRingMargin;
      const double x1 = cross_x + (cfg.lane_count - 1) * w + 0.5 * w + kRingMargin;
      bar.polyline = {{x0, -half_span - kEndcapMargin},
                      {x1, -half_span - kEndcapMargin},
                      {x1, half_span + kEndcapMargin},
                      {x0, half_span + kEndcapMargin}};
      scenario.map_features.push_back(bar);

      // A crosswalk ahead of the box, inert for scoring but part of the map.
      MapFeature cw;
      cw.id = "crosswalk_0";
      cw.kind = FeatureKind::Crosswalk;
      const double cw_x = x0 - 4.0;
      cw.polyline = {{cw_x, -0.5 * w - 1.0}, {cw_x, (cfg.lane_count - 1) * w + 0.5 * w + 1.0}};
      scenario.map_features.push_back(cw);
    }

    // Signals.
    if (cfg.signalized) {
      double stop_s;
      if (cfg.layout == ProcGenConfig::Layout::Intersection) {
        stop_s = 0.5 * cfg.route_length - (0.5 * w + kRingMargin) - 2.0;
      } else {
        stop_s = 0.6 * cfg.route_length;
      }
      add_signal_features(scenario, world, cfg, stop_s, curvature);

      if (cfg.layout == ProcGenConfig::Layout::Intersection && crossing_first_lane >= 0) {
        const double cross_stop_y = -(0.5 * w * cfg.lane_count + kRingMargin) - 2.0;
        for (int i = 0; i < cfg.lane_count; ++i) {
          GenLane& lane = world.lanes[static_cast<std::size_t>(crossing_first_lane + i)];
          lane.stop_s = lane.line.project({lane.line.points().front().x, cross_stop_y}).arclength;
          const Vec2 center = lane_point(lane, lane.stop_s);
          MapFeature f;
          f.id = "cross_stop_line_" + std::to_string(i);
          f.kind = FeatureKind::StopLine;
          f.polyline = {center - Vec2{0.5 * w, 0.0}, center + Vec2{0.5 * w, 0.0}};
          f.attributes.gated_lane = lane.id;
          scenario.map_features.push_back(f);
        }
      }

      // Phase-align so the unimpeded ego reaches its stop line 4 s into GO.
      const double arrival = world.lanes.front().stop_s / std::max(cfg.ego_cruise_speed, 0.1);
      world.phase_offset = kPhasePeriod * 4.0 - (arrival - 4.0);
    }

    // Ego.
    {
      SimVehicle ego;
      ego.id = "ego";
      ego.type = ObjectType::Ego;
      ego.dims = {kEgoLength, kEgoWidth, kEgoHeight};
      ego.lane = 0;
      ego.s = 0.0;
      ego.speed = cfg.ego_cruise_speed;
      ego.desired = cfg.ego_cruise_speed;
      ego.is_ego = true;
      world.vehicles.push_back(std::move(ego));
    }

    // Background agents: spaced along lanes, never closer than a safe gap,
    // and (under signals) never spawned inside the dilemma zone of a line.
    std::vector<std::vector<double>> used_s(world.lanes.size());
    used_s[0].push_back(0.0);  // ego slot
    bool placement_failed = false;
    for (int a = 0; a < cfg.agent_count; ++a) {
      const int lane_idx = rng.uniform_int(static_cast<int>(world.lanes.size()));
      const GenLane& lane = world.lanes[static_cast<std::size_t>(lane_idx)];
      const double lane_cap = cfg.route_length * 0.85;
      bool placed = false;
      for (int tries = 0; tries < 30 && !placed; ++tries) {
        double s = rng.uniform(lane_idx == 0 ? 18.0 : -10.0, lane_cap);
        if (world.signalized && lane.stop_s > 0.0) {
          // keep clear of [stop-40, stop+15]
          if (s > lane.stop_s - 40.0 && s < lane.stop_s + 15.0) continue;
        }
        bool clear = true;
        for (const double other : used_s[static_cast<std::size_t>(lane_idx)]) {
          if (std::abs(other - s) < 16.0) {
            clear = false;
            break;
          }
        }
        if (!clear) continue;
        used_s[static_cast<std::size_t>(lane_idx)].push_back(s);

        SimVehicle v;
        v.id = "agent_" + std::to_string(a);
        v.type = ObjectType::Vehicle;
        v.dims = {rng.uniform(4.2, 5.0), rng.uniform(1.8, 2.0), 1.5};
        v.lane = lane_idx;
        v.s = s;
        v.desired = rng.uniform(0.85, 1.0) * lane.speed_limit;
        v.speed = v.desired;
        world.vehicles.push_back(std::move(v));
        placed = true;
      }
      if (!placed) {
        placement_failed = true;
        break;
      }
    }
    if (placement_failed) continue;

    roll_logs(world, steps, cfg.dt);
    if (!logs_collision_free(world, steps)) continue;

    for (const SimVehicle& v : world.vehicles) {
      Track t;
      t.object_id = v.id;
      t.object_type = v.type;
      t.dims = v.dims;
      t.states = v.states;
      scenario.tracks.push_back(std::move(t));
    }

    if (cfg.signalized) {
      for (const GenLane& lane : world.lanes) {
        if (lane.stop_s < 0.0) continue;
        DynamicMapState d;
        d.lane_id = lane.id;
        d.signal_sequence.reserve(static_cast<std::size_t>(steps));
        for (int k = 0; k < steps; ++k) {
          d.signal_sequence.push_back(signal_for(world, lane, k * cfg.dt));
        }
        scenario.dynamic_states.push_back(std::move(d));
      }
    }

    ScenarioDescription anchored = anchor_scenario(scenario);
    validate_scenario(anchored);
    return anchored;
  }
  throw SimulationError("generate_scenario: no feasible placement after " +
                        std::to_string(kMaxAttempts) + " attempts");
}

std::string procgen_config_to_json(const ProcGenConfig& cfg) {
  nlohmann::json j;
  j["layout"] = to_string(cfg.layout);
  j["lane_count"] = cfg.lane_count;
  j["lane_width"] = cfg.lane_width;
  j["route_length"] = cfg.route_length;
  j["agent_count"] = cfg.agent_count;
  j["ego_cruise_speed"] = cfg.ego_cruise_speed;
  j["signalized"] = cfg.signalized;
  j["duration"] = cfg.duration;
  j["dt"] = cfg.dt;
  return j.dump();
}

ProcGenConfig procgen_config_from_json(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed procgen config: ") + e.what());
  }
  ProcGenConfig cfg;
  try {
    if (j.contains("layout")) cfg.layout = layout_from_string(j.at("layout").get<std::string>());
    cfg.lane_count = j.value("lane_count", cfg.lane_count);
    cfg.lane_width = j.value("lane_width", cfg.lane_width);
    cfg.route_length = j.value("route_length", cfg.route_length);
    cfg.agent_count = j.value("agent_count", cfg.agent_count);
    cfg.ego_cruise_speed = j.value("ego_cruise_speed", cfg.ego_cruise_speed);
    cfg.signalized = j.value("signalized", cfg.signalized);
    cfg.duration = j.value("duration", cfg.duration);
    cfg.dt = j.value("dt", cfg.dt);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("procgen config missing or mistyped field: ") + e.what());
  }
  return cfg;
}

std::vector<ScenarioDescription> generate_suite(const ProcGenConfig& cfg, int n,
                                                std::uint64_t seed) {
  if (n < 1) throw ValidationError("generate_suite: n must be >= 1");
  std::vector<ScenarioDescription> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.push_back(generate_scenario(cfg, seed + static_cast<std::uint64_t>(i)));
  }
  return out;
}

}  // namespace bridgesim
