#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bridgesim/geometry.hpp"

namespace bridgesim {

/// Weights and thresholds of the frame scorer. Defaults are the artifact's
/// pinned configuration; experiments may override them through the engine
/// config file.
struct ScorerWeights {
  double w_ttc = 5.0;
  double w_ep = 5.0;  // open-loop only
  double w_lk = 2.0;
  double w_hc = 2.0;
  double w_ec = 2.0;

  double accel_max = 4.89;     // m/s^2
  double jerk_max = 8.37;      // m/s^3
  double yawrate_max = 0.95;   // rad/s

  double ttc_threshold = 1.0;        // s
  double ttc_projection = 2.0;       // s
  double lk_offset_threshold = 0.5;  // m
  double lk_window = 2.0;            // s
  double comfort_window = 1.0;       // s of history joined to the plan for HC
};

enum class ScoreMode { OpenLoop, ClosedLoop };

/// Per-step score decomposition: critical boolean constraints and weighted
/// quality features. epdms is zero whenever any critical flag is false.
struct FrameScore {
  bool nc = true;   // no at-fault collision
  bool dac = true;  // drivable-area compliance
  bool tlc = true;  // traffic-light compliance
  bool ddc = true;  // driving-direction compliance
  double lk = 1.0;
  double ttc = 1.0;
  double hc = 1.0;
  double ec = 1.0;
  std::optional<double> ep;  // open-loop only
  double epdms = 1.0;
};

/// Gated frame score: product of the critical booleans times the weighted
/// mean of the mode's quality features. Open-loop mode requires ep.
double epdms_frame(const FrameScore& frame, const ScorerWeights& weights, ScoreMode mode);

// ---------------------------------------------------------------------------
// Critical constraints
// ---------------------------------------------------------------------------

struct AgentMotion {
  OrientedBox footprint;
  Vec2 velocity;
  Vec2 accel;
};

/// True when the ego footprint overlaps no agent, or every overlap is
/// classified not-at-fault: the ego is stationary, or the contact lies on the
/// ego's rear face while the other agent closes into it.
bool no_at_fault_collision(const OrientedBox& ego, const Vec2& ego_velocity,
                           std::span<const AgentMotion> agents, bool strict = false);

/// True when all four footprint corners lie inside the union of drivable
/// rings (boundary counted inside).
bool drivable_area_compliance(const OrientedBox& ego,
                              std::span<const std::vector<Vec2>* const> rings);

struct ActiveStopLine {
  const std::vector<Vec2>* line = nullptr;
  bool stop = false;  // signal on the gated lane is STOP
};

/// False iff the step displacement segment crosses a stop line whose gated
/// lane shows STOP.
bool traffic_light_compliance(const Vec2& from, const Vec2& to,
                              std::span<const ActiveStopLine> stop_lines);

/// |wrap(theta_ego - theta_lane)| <= pi/2, boundary inclusive.
bool driving_direction_compliance(double ego_heading, double lane_heading);

// ---------------------------------------------------------------------------
// Quality features
// ---------------------------------------------------------------------------

/// Binary lane-keeping score over a trailing window of signed lateral
/// offsets. The frame fails only when the offset exceeds the threshold at
/// every sample of the window (sustained lingering, not a brief excursion).
double lane_keeping(std::span<const double> trailing_offsets, double offset_threshold);

/// Modified time-to-collision: the minimum strictly positive real root of
/// (a_rel/2) t^2 + v_rel t - dtc = 0. Falls back to dtc / v_rel when the
/// relative acceleration is negligible. nullopt means no conflict (the gap
/// never closes). A zero gap with closing motion reports 0.
std::optional<double> mttc(double dtc, double v_rel, double a_rel);

/// Instantaneous MTTC between two footprints along the line joining them.
/// dtc is the bumper-to-bumper gap along that direction.
std::optional<double> min_mttc_between(const OrientedBox& a, const Vec2& va, const Vec2& aa,
                                       const OrientedBox& b, const Vec2& vb, const Vec2& ab);

/// Projects the ego (constant velocity along its heading) and all agents at
/// 0.1 s resolution over the projection window and scores 1 iff no pairwise
/// MTTC drops below the threshold.
double ttc_feature(const OrientedBox& ego, const Vec2& ego_velocity, const Vec2& ego_accel,
                   std::span<const AgentMotion> agents, const ScorerWeights& weights);

struct KinematicSample {
  double accel = 0.0;     // |d2p/dt2|
  double jerk = 0.0;      // |d3p/dt3|
  double yaw_rate = 0.0;  // |dtheta/dt| from the velocity direction
};

/// Finite-difference kinematic derivatives of a position series sampled at
/// dt. Needs >= 3 positions; shorter input yields an empty profile.
std::vector<KinematicSample> kinematic_profile(std::span<const Vec2> positions, double dt);

bool comfort_within(std::span<const KinematicSample> samples, const ScorerWeights& weights);

struct ComfortScore {
  double hc = 1.0;
  double ec = 1.0;
};

/// EC checks the plan's own kinematic profile against the comfort
/// thresholds; HC applies the same test to the last comfort_window seconds
/// of history concatenated with the plan's first comfort_window seconds, so
/// a discontinuity at the seam fails. Series too short to differentiate
/// score 1.
ComfortScore comfort_scores(std::span<const Vec2> plan_positions,
                            std::span<const Vec2> history_positions, double dt,
                            const ScorerWeights& weights);

/// clamp(achieved / max(expert, eps), 0, 1); open-loop mode only.
double ego_progress(double achieved_arclength, double expert_arclength);

// ---------------------------------------------------------------------------
// Episode-level metrics
// ---------------------------------------------------------------------------

/// Fraction of the expert polyline's arclength reached by the ego's furthest
/// monotone progress point.
double route_completion(std::span<const Vec2> ego_positions, const Polyline& expert_path);

/// 100 * rc * mean(frame epdms).
double closed_loop_score(double rc, std::span<const FrameScore> frames);

/// Minimum over candidates of the mean Euclidean displacement from ground
/// truth. Throws on length mismatch.
double min_ade(std::span<const std::vector<Vec2>> candidates, std::span<const Vec2> ground_truth);

}  // namespace bridgesim
