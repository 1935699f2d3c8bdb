#include "bridgesim/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bridgesim/errors.hpp"

namespace bridgesim {

std::string to_string(TrafficMode mode) {
  switch (mode) {
    case TrafficMode::LogReplay: return "log-replay";
    case TrafficMode::Idm: return "idm";
    case TrafficMode::Adversarial: return "adversarial";
  }
  return "unknown";
}

TrafficMode traffic_mode_from_string(const std::string& s) {
  if (s == "log-replay") return TrafficMode::LogReplay;
  if (s == "idm") return TrafficMode::Idm;
  if (s == "adversarial") return TrafficMode::Adversarial;
  throw ValidationError("unknown traffic mode: " + s);
}

std::vector<AgentState> replay_step(const ScenarioDescription& scenario, int step) {
  if (step < 0 || step >= scenario.step_count) {
    throw SimulationError("replay_step: step " + std::to_string(step) + " out of range");
  }
  std::vector<AgentState> out;
  const double dt = scenario.dt;
  for (const Track& track : scenario.tracks) {
    if (track.object_id == scenario.ego_track_id) continue;
    const TrackState& st = track.states[static_cast<std::size_t>(step)];
    if (!st.valid) continue;

    AgentState agent;
    agent.object_id = track.object_id;
    agent.type = track.object_type;
    agent.pose = st.pose;
    agent.dims = track.dims;
    const Vec2 fwd{std::cos(st.pose.heading), std::sin(st.pose.heading)};
    agent.speed = st.velocity.dot(fwd);
    if (step > 0 && track.states[static_cast<std::size_t>(step - 1)].valid) {
      const TrackState& prev = track.states[static_cast<std::size_t>(step - 1)];
      const Vec2 prev_fwd{std::cos(prev.pose.heading), std::sin(prev.pose.heading)};
      agent.accel = (agent.speed - prev.velocity.dot(prev_fwd)) / dt;
    }
    out.push_back(std::move(agent));
  }
  return out;
}

double idm_accel(const IdmParams& p, double v, double gap, double dv) {
  if (gap <= 0.0) {
    throw SimulationError("idm_accel: non-positive gap (vehicles already overlap)");
  }
  const double free_term = std::pow(std::max(v, 0.0) / p.v0, p.delta);
  double accel = p.a_max * (1.0 - free_term);
  if (std::isfinite(gap)) {
    // Desired gap; the dynamic part is floored at zero so an opening gap
    // cannot re-tighten the interaction term.
    const double dynamic = v * p.T + v * dv / (2.0 * std::sqrt(p.a_max * p.b));
    const double s_star = p.s0 + std::max(0.0, dynamic);
    const double ratio = s_star / gap;
    accel = p.a_max * (1.0 - free_term - ratio * ratio);
  }
  return std::clamp(accel, -2.0 * p.b, p.a_max);
}

double footprint_gap(const OrientedBox& a, const OrientedBox& b) {
  const Vec2 r = b.pose.position - a.pose.position;
  const double d = r.norm();
  if (d < 1e-9) return 0.0;
  const Vec2 dir = r / d;
  return std::max(0.0, d - a.support(dir) - b.support(dir));
}

namespace {

struct LeaderInfo {
  double gap = std::numeric_limits<double>::infinity();
  double speed = 0.0;
};

// Arclength position of a point on a lane, or nullopt when it is too far off.
std::optional<double> arclength_on_lane(const MapIndex::Lane& lane, const Vec2& position,
                                        double max_lateral = 2.5) {
  const PolylineProjection proj = lane.centerline.project(position);
  if (proj.distance > max_lateral) return std::nullopt;
  return proj.arclength;
}

void consider_leader(LeaderInfo& best, double gap, double speed) {
  if (gap > 0.0 && gap < best.gap) best = {gap, speed};
}

}  // namespace

AgentState idm_agent_step(const WorldState& world, const AgentState& agent,
                          const IdmParams& params, double dt) {
  const MapIndex* map = world.map;
  const MapIndex::Lane* lane = map != nullptr ? map->lane_by_id(agent.lane_id) : nullptr;

  if (lane == nullptr) {
    // Lane loss: hold heading and coast.
    AgentState next = agent;
    next.accel = 0.0;
    next.pose.position += agent.velocity() * dt;
    return next;
  }

  const double half_len = 0.5 * agent.dims.length;
  const PolylineProjection proj = lane->centerline.project(agent.pose.position);
  const double s = proj.arclength;

  constexpr double kLeaderRange = 100.0;
  LeaderInfo leader;

  const auto scan_lane = [&](const MapIndex::Lane& scan, double s_offset) {
    for (const AgentState& other : world.agents) {
      if (other.object_id == agent.object_id) continue;
      const auto s_other = arclength_on_lane(scan, other.pose.position);
      if (!s_other) continue;
      const double ds = (*s_other + s_offset) - s;
      if (ds <= 0.0 || ds > kLeaderRange) continue;
      consider_leader(leader, ds - half_len - 0.5 * other.dims.length, other.speed);
    }
    // The ego participates in traffic like any other vehicle.
    const auto s_ego = arclength_on_lane(scan, world.ego.pose.position);
    if (s_ego) {
      const double ds = (*s_ego + s_offset) - s;
      if (ds > 0.0 && ds <= kLeaderRange) {
        consider_leader(leader, ds - half_len - 0.5 * world.ego_dims.length, world.ego.speed);
      }
    }
  };

  scan_lane(*lane, 0.0);
  for (const std::string& succ_id : lane->feature->attributes.successors) {
    if (const MapIndex::Lane* succ = map->lane_by_id(succ_id)) {
      scan_lane(*succ, lane->centerline.length() - 0.0);
      break;  // one hop is enough for the generated road networks
    }
  }

  // A STOP (or WAIT) signal on this lane acts as a stationary leader parked
  // at the stop line.
  const Signal signal = world.signal_on(agent.lane_id);
  if (signal != Signal::GO && map != nullptr) {
    for (const MapIndex::StopLine& sl : map->stop_lines()) {
      if (sl.gated_lane != agent.lane_id || sl.feature->polyline.empty()) continue;
      Vec2 mid{0.0, 0.0};
      for (const Vec2& p : sl.feature->polyline) mid += p;
      mid = mid / static_cast<double>(sl.feature->polyline.size());
      const double s_stop = lane->centerline.project(mid).arclength;
      const double ds = s_stop - s;
      if (ds > 0.0 && ds <= kLeaderRange) consider_leader(leader, ds - half_len, 0.0);
    }
  }

  IdmParams p = params;
  if (lane->speed_limit > 0.0) p.v0 = lane->speed_limit;

  double accel = 0.0;
  if (std::isfinite(leader.gap)) {
    const double safe_gap = std::max(leader.gap, 0.05);
    accel = idm_accel(p, agent.speed, safe_gap, agent.speed - leader.speed);
  } else {
    accel = idm_accel(p, agent.speed, std::numeric_limits<double>::infinity(), 0.0);
  }

  AgentState next = agent;
  next.accel = accel;
  next.speed = std::max(0.0, agent.speed + accel * dt);
  const double s_next = s + 0.5 * (agent.speed + next.speed) * dt;

  // Lateral servo onto the centerline with a 1 s time constant.
  const double lateral = proj.signed_lateral * std::exp(-dt / 1.0);

  const MapIndex::Lane* placed_lane = lane;
  double s_place = s_next;
  if (s_next > lane->centerline.length() && !lane->feature->attributes.successors.empty()) {
    if (const MapIndex::Lane* succ = map->lane_by_id(lane->feature->attributes.successors.front())) {
      s_place = s_next - lane->centerline.length();
      placed_lane = succ;
      next.lane_id = succ->feature->id;
    }
  }
  const double heading = placed_lane->centerline.heading_at(s_place);
  const Vec2 base = placed_lane->centerline.point_at(s_place);
  const Vec2 left{-std::sin(heading), std::cos(heading)};
  next.pose.position = base + left * lateral;
  next.pose.heading = heading;
  return next;
}

AgentState adversary_step(const WorldState& world, const AgentState& agent,
                          const AdversaryScript& script, AdversaryState& state, double dt) {
  if (!state.triggered) {
    bool fire = false;
    switch (script.trigger) {
      case AdversaryScript::Trigger::TimeAt:
        fire = (world.step + 1) * dt > script.trigger_value + 1e-9;
        break;
      case AdversaryScript::Trigger::EgoGapBelow:
        fire = footprint_gap(world.ego_footprint(), agent.footprint()) < script.trigger_value;
        break;
    }
    if (fire) {
      state.triggered = true;
      state.lateral_done = 0.0;
      // Shift toward the ego's side of the road.
      const Vec2 local = to_frame(agent.pose, world.ego.pose.position);
      state.cut_sign = local.y >= 0.0 ? 1.0 : -1.0;
    }
  }

  if (!state.triggered) {
    // Pre-trigger: exact log replay.
    if (world.scenario != nullptr) {
      const int next_step = std::min(world.step + 1, world.scenario->step_count - 1);
      for (const AgentState& replayed : replay_step(*world.scenario, next_step)) {
        if (replayed.object_id == agent.object_id) return replayed;
      }
    }
    return agent;  // invalid in the log at the next step: freeze
  }

  AgentState next = agent;
  switch (script.maneuver) {
    case AdversaryScript::Maneuver::HardBrake: {
      next.speed = std::max(0.0, agent.speed - script.decel * dt);
      next.accel = (next.speed - agent.speed) / dt;
      const Vec2 fwd{std::cos(agent.pose.heading), std::sin(agent.pose.heading)};
      next.pose.position += fwd * (0.5 * (agent.speed + next.speed) * dt);
      break;
    }
    case AdversaryScript::Maneuver::CutIn: {
      const double rate = script.cut_lateral / std::max(script.cut_duration, 1e-6);
      const double remaining = script.cut_lateral - state.lateral_done;
      const double shift = std::min(rate * dt, std::max(remaining, 0.0));
      state.lateral_done += shift;
      const Vec2 fwd{std::cos(agent.pose.heading), std::sin(agent.pose.heading)};
      const Vec2 left = fwd.perp();
      next.pose.position += fwd * (agent.speed * dt) + left * (state.cut_sign * shift);
      next.accel = 0.0;
      break;
    }
  }
  return next;
}

}  // namespace bridgesim
