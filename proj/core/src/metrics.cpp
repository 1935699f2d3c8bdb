#include "bridgesim/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "bridgesim/errors.hpp"

namespace bridgesim {

double epdms_frame(const FrameScore& frame, const ScorerWeights& w, ScoreMode mode) {
  const double gate = (frame.nc && frame.dac && frame.tlc && frame.ddc) ? 1.0 : 0.0;

  double weight_sum = w.w_ttc + w.w_lk + w.w_hc + w.w_ec;
  double value_sum = w.w_ttc * frame.ttc + w.w_lk * frame.lk + w.w_hc * frame.hc + w.w_ec * frame.ec;
  if (mode == ScoreMode::OpenLoop) {
    if (!frame.ep.has_value()) {
      throw ValidationError("epdms_frame: open-loop scoring requires the ep feature");
    }
    weight_sum += w.w_ep;
    value_sum += w.w_ep * *frame.ep;
  }
  if (weight_sum <= 0.0) {
    throw ValidationError("epdms_frame: total feature weight must be positive");
  }
  return gate * (value_sum / weight_sum);
}

// ---------------------------------------------------------------------------
// Critical constraints
// ---------------------------------------------------------------------------

bool no_at_fault_collision(const OrientedBox& ego, const Vec2& ego_velocity,
                           std::span<const AgentMotion> agents, bool strict) {
  constexpr double kStationary = 0.05;  // m/s
  for (const AgentMotion& agent : agents) {
    if (!boxes_overlap(ego, agent.footprint)) continue;
    if (strict) return false;

    if (ego_velocity.norm() < kStationary) continue;  // struck while stationary

    // Rear-end taken: contact on the ego rear face with the agent closing in.
    const Vec2 local = to_frame(ego.pose, agent.footprint.pose.position);
    const bool behind = local.x < 0.0 && std::abs(local.y) <= -local.x;
    const Vec2 toward_ego = (ego.pose.position - agent.footprint.pose.position).normalized();
    const bool agent_closing = (agent.velocity - ego_velocity).dot(toward_ego) > 0.0;
    if (behind && agent_closing) continue;

    return false;
  }
  return true;
}

bool drivable_area_compliance(const OrientedBox& ego,
                              std::span<const std::vector<Vec2>* const> rings) {
  if (rings.empty()) return false;
  for (const Vec2& corner : ego.corners()) {
    bool covered = false;
    for (const std::vector<Vec2>* ring : rings) {
      if (point_in_polygon(*ring, corner)) {
        covered = true;
        break;
      }
    }
    if (!covered) return false;
  }
  return true;
}

bool traffic_light_compliance(const Vec2& from, const Vec2& to,
                              std::span<const ActiveStopLine> stop_lines) {
  if ((to - from).norm_sq() < 1e-18) return true;
  for (const ActiveStopLine& sl : stop_lines) {
    if (!sl.stop || sl.line == nullptr) continue;
    const std::vector<Vec2>& pts = *sl.line;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      if (segments_intersect(from, to, pts[i], pts[i + 1])) return false;
    }
  }
  return true;
}

bool driving_direction_compliance(double ego_heading, double lane_heading) {
  return std::abs(angle_diff(ego_heading, lane_heading)) <= 0.5 * kPi + 1e-12;
}

// ---------------------------------------------------------------------------
// Quality features
// ---------------------------------------------------------------------------

double lane_keeping(std::span<const double> trailing_offsets, double offset_threshold) {
  if (trailing_offsets.empty()) return 1.0;
  for (const double offset : trailing_offsets) {
    if (std::abs(offset) <= offset_threshold) return 1.0;
  }
  return 0.0;  // violated at every sample of the window
}

std::optional<double> mttc(double dtc, double v_rel, double a_rel) {
  constexpr double kAccelEps = 1e-9;
  if (dtc < 1e-12) {
    // Already touching: a conflict iff the gap is still closing.
    if (v_rel > 0.0 || (std::abs(v_rel) <= 0.0 && a_rel > 0.0)) return 0.0;
    return std::nullopt;
  }
  if (std::abs(a_rel) < kAccelEps) {
    if (v_rel <= 0.0) return std::nullopt;
    return dtc / v_rel;
  }
  // Roots of (a/2) t^2 + v t - dtc = 0.
  const double disc = v_rel * v_rel + 2.0 * a_rel * dtc;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t1 = (-v_rel - sq) / a_rel;
  const double t2 = (-v_rel + sq) / a_rel;
  double best = std::numeric_limits<double>::infinity();
  if (t1 > 0.0) best = std::min(best, t1);
  if (t2 > 0.0) best = std::min(best, t2);
  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

std::optional<double> min_mttc_between(const OrientedBox& a, const Vec2& va, const Vec2& aa,
                                       const OrientedBox& b, const Vec2& vb, const Vec2& ab) {
  const Vec2 r = b.pose.position - a.pose.position;
  const double center_dist = r.norm();
  if (center_dist < 1e-9) return 0.0;
  const Vec2 dir = r / center_dist;
  const double gap = center_dist - a.support(dir) - b.support(dir);
  const double closing_speed = (va - vb).dot(dir);
  const double closing_accel = (aa - ab).dot(dir);
  return mttc(std::max(gap, 0.0), closing_speed, closing_accel);
}

double ttc_feature(const OrientedBox& ego, const Vec2& ego_velocity, const Vec2& ego_accel,
                   std::span<const AgentMotion> agents, const ScorerWeights& weights) {
  if (agents.empty()) return 1.0;
  constexpr double kStepS = 0.1;
  const int steps = std::max(1, static_cast<int>(std::lround(weights.ttc_projection / kStepS)));

  for (int i = 0; i <= steps; ++i) {
    const double t = i * kStepS;
    OrientedBox ego_box = ego;
    ego_box.pose.position = ego.pose.position + ego_velocity * t;
    for (const AgentMotion& agent : agents) {
      OrientedBox agent_box = agent.footprint;
      agent_box.pose.position = agent.footprint.pose.position + agent.velocity * t;
      const auto m =
          min_mttc_between(ego_box, ego_velocity, ego_accel, agent_box, agent.velocity, agent.accel);
      if (m.has_value() && *m < weights.ttc_threshold) return 0.0;
    }
  }
  return 1.0;
}

std::vector<KinematicSample> kinematic_profile(std::span<const Vec2> positions, double dt) {
  const std::size_t n = positions.size();
  std::vector<KinematicSample> out;
  if (n < 3 || dt <= 0.0) return out;

  std::vector<Vec2> vel(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      vel[i] = (positions[1] - positions[0]) / dt;
    } else if (i == n - 1) {
      vel[i] = (positions[n - 1] - positions[n - 2]) / dt;
    } else {
      vel[i] = (positions[i + 1] - positions[i - 1]) / (2.0 * dt);
    }
  }
  std::vector<Vec2> acc(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = std::clamp<std::size_t>(i, 1, n - 2);
    acc[i] = (positions[j + 1] - positions[j] * 2.0 + positions[j - 1]) / (dt * dt);
  }

  constexpr double kHeadingSpeed = 0.1;  // m/s below which the heading is held
  std::vector<double> heading(n, 0.0);
  double last_heading = 0.0;
  bool heading_known = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (vel[i].norm() > kHeadingSpeed) {
      last_heading = std::atan2(vel[i].y, vel[i].x);
      heading_known = true;
    }
    heading[i] = heading_known ? last_heading : 0.0;
  }

  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].accel = acc[i].norm();
    if (i == 0) {
      out[i].jerk = (acc[1] - acc[0]).norm() / dt;
      out[i].yaw_rate = std::abs(angle_diff(heading[1], heading[0])) / dt;
    } else if (i == n - 1) {
      out[i].jerk = (acc[n - 1] - acc[n - 2]).norm() / dt;
      out[i].yaw_rate = std::abs(angle_diff(heading[n - 1], heading[n - 2])) / dt;
    } else {
      out[i].jerk = (acc[i + 1] - acc[i - 1]).norm() / (2.0 * dt);
      out[i].yaw_rate = std::abs(angle_diff(heading[i + 1], heading[i - 1])) / (2.0 * dt);
    }
  }
  return out;
}

bool comfort_within(std::span<const KinematicSample> samples, const ScorerWeights& w) {
  for (const KinematicSample& s : samples) {
    if (s.accel > w.accel_max || s.jerk > w.jerk_max || s.yaw_rate > w.yawrate_max) return false;
  }
  return true;
}

ComfortScore comfort_scores(std::span<const Vec2> plan_positions,
                            std::span<const Vec2> history_positions, double dt,
                            const ScorerWeights& weights) {
  ComfortScore score;
  const auto plan_profile = kinematic_profile(plan_positions, dt);
  if (!plan_profile.empty()) {
    score.ec = comfort_within(plan_profile, weights) ? 1.0 : 0.0;
  }

  const std::size_t window = dt > 0.0
      ? static_cast<std::size_t>(std::lround(weights.comfort_window / dt))
      : 0;
  if (window >= 2 && history_positions.size() >= 2 && !plan_positions.empty()) {
    std::vector<Vec2> joined;
    const std::size_t h = std::min(history_positions.size(), window);
    const std::size_t p = std::min(plan_positions.size(), window);
    joined.reserve(h + p);
    joined.insert(joined.end(), history_positions.end() - static_cast<std::ptrdiff_t>(h),
                  history_positions.end());
    joined.insert(joined.end(), plan_positions.begin(),
                  plan_positions.begin() + static_cast<std::ptrdiff_t>(p));
    const auto seam_profile = kinematic_profile(joined, dt);
    if (!seam_profile.empty()) {
      score.hc = comfort_within(seam_profile, weights) ? 1.0 : 0.0;
    }
  }
  return score;
}

double ego_progress(double achieved_arclength, double expert_arclength) {
  constexpr double kEps = 1e-6;
  const double ratio = achieved_arclength / std::max(expert_arclength, kEps);
  return std::clamp(ratio, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Episode-level metrics
// ---------------------------------------------------------------------------

double route_completion(std::span<const Vec2> ego_positions, const Polyline& expert_path) {
  const double total = expert_path.length();
  if (total <= 1e-9) return 1.0;  // degenerate expert: nothing left to complete
  double furthest = 0.0;
  for (const Vec2& p : ego_positions) {
    furthest = std::max(furthest, expert_path.project(p).arclength);
  }
  return std::clamp(furthest / total, 0.0, 1.0);
}

double closed_loop_score(double rc, std::span<const FrameScore> frames) {
  if (frames.empty()) throw SimulationError("closed_loop_score: needs at least one frame");
  double sum = 0.0;
  for (const FrameScore& f : frames) sum += f.epdms;
  return 100.0 * rc * (sum / static_cast<double>(frames.size()));
}

double min_ade(std::span<const std::vector<Vec2>> candidates, std::span<const Vec2> ground_truth) {
  if (candidates.empty()) throw SimulationError("min_ade: needs at least one candidate");
  double best = std::numeric_limits<double>::infinity();
  for (const std::vector<Vec2>& c : candidates) {
    if (c.size() != ground_truth.size()) {
      throw SimulationError("min_ade: candidate length does not match ground truth");
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < c.size(); ++t) sum += distance(c[t], ground_truth[t]);
    best = std::min(best, sum / static_cast<double>(c.size()));
  }
  return best;
}

}  // namespace bridgesim
