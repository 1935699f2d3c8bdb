#include "bridgesim/vehicle.hpp"

#include <cmath>

#include "bridgesim/errors.hpp"

namespace bridgesim {

EgoState step_bicycle(const EgoState& state, const ControlCommand& cmd, double dt) {
  if (dt <= 0.0) throw SimulationError("step_bicycle: dt must be positive");
  if (!state.pose.position.finite() || !std::isfinite(state.pose.heading) ||
      !std::isfinite(state.speed) || !std::isfinite(cmd.accel) || !std::isfinite(cmd.curvature)) {
    throw SimulationError("step_bicycle: non-finite state or command");
  }
  const ControlCommand c = cmd.saturated();

  EgoState next;
  next.speed = std::clamp(state.speed + c.accel * dt, kMinSpeed, kMaxSpeed);
  const double v_mid = 0.5 * (state.speed + next.speed);
  const double dtheta = v_mid * c.curvature * dt;
  const double heading_mid = state.pose.heading + 0.5 * dtheta;
  next.pose.heading = wrap_angle(state.pose.heading + dtheta);
  next.pose.position =
      state.pose.position + Vec2{std::cos(heading_mid), std::sin(heading_mid)} * (v_mid * dt);
  next.accel = c.accel;
  next.yaw_rate = next.speed * c.curvature;
  return next;
}

std::pair<double, PidState> pid_longitudinal(const PidParams& params, PidState pid,
                                             double target_speed, double current_speed,
                                             double dt) {
  const double error = target_speed - current_speed;
  const double derivative = pid.has_prev ? (error - pid.prev_error) / dt : 0.0;

  // Anti-windup: clamp the accumulator and freeze it while the output is
  // saturated in the error's direction.
  const double tentative = std::clamp(pid.integral + error * dt, -params.integral_limit,
                                      params.integral_limit);
  double raw = params.kp * error + params.ki * tentative + params.kd * derivative;
  if (std::abs(raw) >= kMaxAccel && raw * error > 0.0) {
    raw = params.kp * error + params.ki * pid.integral + params.kd * derivative;
  } else {
    pid.integral = tentative;
  }
  pid.prev_error = error;
  pid.has_prev = true;
  return {std::clamp(raw, -kMaxAccel, kMaxAccel), pid};
}

std::optional<double> pure_pursuit(const EgoState& state, const Polyline& path,
                                   double lookahead) {
  if (path.size() < 2 || lookahead <= 0.0) return std::nullopt;
  const PolylineProjection proj = path.project(state.pose.position);
  const double target_s = proj.arclength + lookahead;
  if (target_s > path.length() + 1e-9) return std::nullopt;  // no point far enough ahead

  const Vec2 target = path.point_at(target_s);
  const Vec2 local = to_frame(state.pose, target);
  const double dist_sq = local.norm_sq();
  if (dist_sq < 1e-12) return 0.0;
  const double curvature = 2.0 * local.y / dist_sq;
  return std::clamp(curvature, -kMaxCurvature, kMaxCurvature);
}

std::optional<double> pure_pursuit(const EgoState& state, std::span<const Vec2> path,
                                   double lookahead) {
  return pure_pursuit(state, Polyline(std::vector<Vec2>(path.begin(), path.end())), lookahead);
}

std::vector<Vec2> CachedPlan::world_waypoints() const {
  std::vector<Vec2> world;
  world.reserve(waypoints.size());
  for (const Vec2& wp : waypoints) world.push_back(from_frame(origin, wp));
  return world;
}

double CachedPlan::speed_at(double index) const {
  const int n = static_cast<int>(waypoints.size());
  if (n < 2 || dt <= 0.0) return 0.0;
  int i = static_cast<int>(std::lround(index));
  i = std::clamp(i, 0, n - 1);
  const int lo = std::max(i - 1, 0);
  const int hi = std::min(i + 1, n - 1);
  const double span_s = (hi - lo) * dt;
  if (span_s <= 0.0) return 0.0;
  return distance(waypoints[hi], waypoints[lo]) / span_s;
}

TrackResult track_plan(const EgoState& state, const CachedPlan& plan, double elapsed_in_plan,
                       const TrackingParams& params, const PidState& pid, double dt) {
  TrackResult result;
  result.pid = pid;
  if (plan.waypoints.empty()) {
    result.status = TrackStatus::EndOfPlan;
    return result;
  }

  // Plan index 0 is the state one plan-dt after the origin.
  const double cursor = elapsed_in_plan / plan.dt;
  if (cursor > static_cast<double>(plan.waypoints.size()) - 1.0 + 1e-9) {
    result.status = TrackStatus::EndOfPlan;
    return result;
  }

  const double target_speed = plan.speed_at(cursor);
  auto [accel, new_pid] = pid_longitudinal(params.pid, pid, target_speed, state.speed, dt);
  result.pid = new_pid;

  const std::vector<Vec2> world = plan.world_waypoints();
  const double lookahead =
      std::max(params.lookahead_base, params.lookahead_gain * std::abs(state.speed));
  double curvature = 0.0;
  if (const auto kappa = pure_pursuit(state, world, lookahead)) {
    curvature = *kappa;
  } else if (world.size() >= 2) {
    // Path shorter than the lookahead: steer at the final waypoint instead of
    // reporting end-of-plan while waypoints remain.
    const Vec2 local = to_frame(state.pose, world.back());
    const double d_sq = local.norm_sq();
    if (d_sq > 1.0) curvature = std::clamp(2.0 * local.y / d_sq, -kMaxCurvature, kMaxCurvature);
  }

  result.command = ControlCommand{accel, curvature}.saturated();
  return result;
}

}  // namespace bridgesim
