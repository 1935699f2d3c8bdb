#pragma once

#include <optional>
#include <vector>

#include "bridgesim/world.hpp"

namespace bridgesim {

enum class TrafficMode { LogReplay, Idm, Adversarial };

std::string to_string(TrafficMode mode);
TrafficMode traffic_mode_from_string(const std::string& s);

/// Intelligent-driver-model parameters. Defaults follow the canonical
/// constants; v0 is overridden per lane when a speed limit exists.
struct IdmParams {
  double v0 = 10.0;     // desired speed, m/s
  double T = 1.5;       // time headway, s
  double s0 = 2.0;      // jam distance, m
  double a_max = 1.5;   // m/s^2
  double b = 2.0;       // comfortable deceleration, m/s^2
  double delta = 4.0;   // acceleration exponent
};

/// Logged states of all valid non-ego agents at `step`.
std::vector<AgentState> replay_step(const ScenarioDescription& scenario, int step);

/// IDM longitudinal acceleration for bumper gap `gap` (+inf = free road) and
/// closing speed dv = v - v_leader. Clamped to [-2b, a_max]. Throws when the
/// gap is already non-positive.
double idm_accel(const IdmParams& params, double v, double gap, double dv);

/// Advances one IDM-governed agent by one step against the previous-step
/// world snapshot: same-lane leader search (agents and ego, one successor hop,
/// 100 m range), stop lines on STOP/WAIT treated as stationary leaders, and
/// lateral servo onto the lane centerline.
AgentState idm_agent_step(const WorldState& world, const AgentState& agent,
                          const IdmParams& params, double dt);

// ---------------------------------------------------------------------------
// Scripted adversary
// ---------------------------------------------------------------------------

struct AdversaryScript {
  enum class Trigger { TimeAt, EgoGapBelow };
  enum class Maneuver { HardBrake, CutIn };

  Trigger trigger = Trigger::TimeAt;
  double trigger_value = 0.0;  // seconds or meters

  Maneuver maneuver = Maneuver::HardBrake;
  double decel = 6.0;            // HardBrake, m/s^2 (<= 9)
  double cut_lateral = 3.5;      // CutIn total lateral shift, m
  double cut_duration = 2.0;     // CutIn ramp time, s
};

/// Latched adversary execution state; value-passed between steps.
struct AdversaryState {
  bool triggered = false;
  double lateral_done = 0.0;  // CutIn progress, m
  double cut_sign = 1.0;      // +1 = shift left
};

/// Before the trigger the agent replays its log; afterwards it executes the
/// scripted maneuver kinematically.
AgentState adversary_step(const WorldState& world, const AgentState& agent,
                          const AdversaryScript& script, AdversaryState& state, double dt);

/// Bumper-to-bumper gap between two footprints along the line joining their
/// centers (0 when overlapping).
double footprint_gap(const OrientedBox& a, const OrientedBox& b);

}  // namespace bridgesim
