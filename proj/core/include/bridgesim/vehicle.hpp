#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bridgesim/geometry.hpp"

namespace bridgesim {

// Saturation bounds shared by every controller output.
inline constexpr double kMaxAccel = 8.0;       // m/s^2
inline constexpr double kMaxCurvature = 0.3;   // 1/m
inline constexpr double kMinSpeed = -0.5;      // small reverse tolerance
inline constexpr double kMaxSpeed = 60.0;

struct EgoState {
  Pose2 pose;
  double speed = 0.0;     // m/s, forward positive
  double accel = 0.0;     // m/s^2, longitudinal, as executed
  double yaw_rate = 0.0;  // rad/s
};

struct ControlCommand {
  double accel = 0.0;      // m/s^2
  double curvature = 0.0;  // 1/m

  ControlCommand saturated() const {
    return {std::clamp(accel, -kMaxAccel, kMaxAccel),
            std::clamp(curvature, -kMaxCurvature, kMaxCurvature)};
  }
};

struct PidParams {
  double kp = 4.0;
  double ki = 0.2;
  double kd = 0.0;
  double integral_limit = 2.0;  // anti-windup clamp on the accumulated error
};

struct PidState {
  double integral = 0.0;    // accumulated error * s
  double prev_error = 0.0;  // m/s
  bool has_prev = false;
};

struct TrackingParams {
  PidParams pid;
  double lookahead_base = 4.0;   // m
  double lookahead_gain = 0.8;   // s (lookahead = max(base, gain * speed))
  double plan_end_brake = 4.0;   // m/s^2 used by the engine on end-of-plan
};

/// Advances the curvature-controlled kinematic bicycle by one step using
/// midpoint (second-order) integration. Deterministic; throws on non-finite
/// input.
EgoState step_bicycle(const EgoState& state, const ControlCommand& cmd, double dt);

/// Standard PID on speed error with anti-windup clamping. Returns the
/// saturated acceleration command and the updated controller state.
std::pair<double, PidState> pid_longitudinal(const PidParams& params, PidState pid,
                                             double target_speed, double current_speed,
                                             double dt);

/// Pure Pursuit lateral tracking: selects the first path point at arc
/// distance >= lookahead ahead of the ego projection and returns the
/// curvature of the circle through it. nullopt signals end of path.
std::optional<double> pure_pursuit(const EgoState& state, const Polyline& path,
                                   double lookahead);
std::optional<double> pure_pursuit(const EgoState& state, std::span<const Vec2> path,
                                   double lookahead);

/// One cached plan being consumed between replan ticks. Waypoints live in the
/// ego frame captured at `origin` when the plan was selected.
struct CachedPlan {
  std::vector<Vec2> waypoints;  // ego frame at origin
  double dt = 0.1;
  Pose2 origin;

  std::vector<Vec2> world_waypoints() const;
  /// Speed implied by waypoint spacing at (fractional) index, by central
  /// differences; clamped to the valid index range.
  double speed_at(double index) const;
};

enum class TrackStatus { Ok, EndOfPlan };

struct TrackResult {
  ControlCommand command;
  TrackStatus status = TrackStatus::Ok;
  PidState pid;
};

/// Computes the control command that keeps the ego on `plan` at
/// `elapsed_in_plan` seconds after the plan origin.
TrackResult track_plan(const EgoState& state, const CachedPlan& plan, double elapsed_in_plan,
                       const TrackingParams& params, const PidState& pid, double dt);

}  // namespace bridgesim
