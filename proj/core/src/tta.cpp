#include "bridgesim/tta.hpp"

#include <algorithm>
#include <cmath>

#include "bridgesim/errors.hpp"
#include "bridgesim/traffic.hpp"

namespace bridgesim {

std::string to_string(Propagation p) {
  return p == Propagation::ConstantVelocity ? "constant-velocity" : "constant-acceleration";
}

Propagation propagation_from_string(const std::string& s) {
  if (s == "constant-velocity") return Propagation::ConstantVelocity;
  if (s == "constant-acceleration") return Propagation::ConstantAcceleration;
  throw ValidationError("unknown propagation mode: " + s);
}

std::vector<WorldSnapshot> propagate_world(const WorldState& world, int steps, double dt,
                                           Propagation mode) {
  if (steps < 1) throw SimulationError("propagate_world: steps must be >= 1");
  constexpr double kDecayTime = 1.0;  // s over which the acceleration fades

  std::vector<WorldSnapshot> out(static_cast<std::size_t>(steps));

  struct Moving {
    Vec2 dir;
    double speed;
    double a0;
    double travelled = 0.0;
  };
  std::vector<Moving> motion;
  motion.reserve(world.agents.size());
  for (const AgentState& a : world.agents) {
    motion.push_back({{std::cos(a.pose.heading), std::sin(a.pose.heading)},
                      a.speed,
                      mode == Propagation::ConstantAcceleration ? a.accel : 0.0});
  }

  for (int i = 0; i < steps; ++i) {
    WorldSnapshot& snap = out[static_cast<std::size_t>(i)];
    snap.step = world.step + i + 1;
    snap.agents = world.agents;
    for (std::size_t j = 0; j < snap.agents.size(); ++j) {
      Moving& m = motion[j];
      if (mode == Propagation::ConstantVelocity) {
        m.travelled += m.speed * dt;
        snap.agents[j].accel = 0.0;
      } else {
        // Trapezoidal substeps; exact for the piecewise-linear decay profile
        // except at the v=0 clamp.
        constexpr int kSub = 10;
        const double h = dt / kSub;
        for (int u = 0; u < kSub; ++u) {
          const double t0 = i * dt + u * h;
          const double t1 = t0 + h;
          const double a_t0 = m.a0 * std::max(0.0, 1.0 - t0 / kDecayTime);
          const double a_t1 = m.a0 * std::max(0.0, 1.0 - t1 / kDecayTime);
          const double v0 = m.speed;
          const double v1 = std::max(0.0, v0 + 0.5 * (a_t0 + a_t1) * h);
          m.travelled += 0.5 * (v0 + v1) * h;
          m.speed = v1;
        }
        snap.agents[j].accel = m.a0 * std::max(0.0, 1.0 - (i + 1) * dt / kDecayTime);
        snap.agents[j].speed = m.speed;
      }
      snap.agents[j].pose.position = world.agents[j].pose.position + m.dir * m.travelled;
    }
  }
  return out;
}

std::vector<WorldSnapshot> replay_snapshots(const WorldState& world, int steps) {
  if (world.scenario == nullptr) {
    throw SimulationError("replay_snapshots: world has no scenario attached");
  }
  std::vector<WorldSnapshot> out(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const int step = std::min(world.step + i + 1, world.scenario->step_count - 1);
    out[static_cast<std::size_t>(i)].step = world.step + i + 1;
    out[static_cast<std::size_t>(i)].agents = replay_step(*world.scenario, step);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plan evaluation
// ---------------------------------------------------------------------------

PlanEvaluation evaluate_plan(const WorldState& world, const CandidatePlan& plan,
                             const Pose2& plan_origin, std::span<const WorldSnapshot> snapshots,
                             int horizon, const RolloutConfig& cfg) {
  PlanEvaluation eval;
  const int n = std::min({horizon, static_cast<int>(plan.waypoints.size()),
                          static_cast<int>(snapshots.size())});
  if (n <= 0) return eval;
  eval.rewards.assign(static_cast<std::size_t>(n), 0.0);

  const ScorerWeights& w = cfg.weights;
  const double dt = plan.dt;

  // World-frame plan states.
  std::vector<Vec2> pos(static_cast<std::size_t>(n));
  std::vector<double> heading(static_cast<std::size_t>(n));
  std::vector<double> speed(static_cast<std::size_t>(n));
  Vec2 prev = plan_origin.position;
  double prev_heading = plan_origin.heading;
  for (int i = 0; i < n; ++i) {
    const Vec2 p = from_frame(plan_origin, plan.waypoints[static_cast<std::size_t>(i)]);
    const Vec2 d = p - prev;
    const double dist = d.norm();
    pos[static_cast<std::size_t>(i)] = p;
    speed[static_cast<std::size_t>(i)] = dist / dt;
    heading[static_cast<std::size_t>(i)] = dist > 1e-6 ? std::atan2(d.y, d.x) : prev_heading;
    prev = p;
    prev_heading = heading[static_cast<std::size_t>(i)];
  }

  // Comfort profiles, computed once per plan.
  std::vector<Vec2> with_origin;
  with_origin.reserve(static_cast<std::size_t>(n) + 1);
  with_origin.push_back(plan_origin.position);
  with_origin.insert(with_origin.end(), pos.begin(), pos.end());
  const auto plan_profile = kinematic_profile(with_origin, dt);

  const std::size_t comfort_steps =
      dt > 0.0 ? static_cast<std::size_t>(std::lround(w.comfort_window / dt)) : 0;
  std::vector<Vec2> seam = world.history.trailing_positions(comfort_steps);
  const std::size_t hist_n = seam.size();
  for (std::size_t i = 0; i < std::min<std::size_t>(comfort_steps, pos.size()); ++i) {
    seam.push_back(pos[i]);
  }
  const auto seam_profile = hist_n >= 2 ? kinematic_profile(seam, dt)
                                        : std::vector<KinematicSample>{};

  const auto comfort_sample_ok = [&w](const KinematicSample& s) {
    return s.accel <= w.accel_max && s.jerk <= w.jerk_max && s.yaw_rate <= w.yawrate_max;
  };

  // Trailing lane offsets feeding the lane-keeping window.
  const std::size_t lk_steps =
      dt > 0.0 ? static_cast<std::size_t>(std::lround(w.lk_window / dt)) : 0;
  std::vector<double> offsets = world.history.trailing_offsets(lk_steps);

  for (int i = 0; i < n; ++i) {
    const std::size_t ui = static_cast<std::size_t>(i);
    const WorldSnapshot& snap = snapshots[ui];
    FrameScore frame;

    const OrientedBox ego_box{{pos[ui], heading[ui]}, world.ego_dims.length,
                              world.ego_dims.width};
    const Vec2 ego_vel = Vec2{std::cos(heading[ui]), std::sin(heading[ui])} * speed[ui];
    const double accel_scalar =
        i == 0 ? (speed[ui] - world.ego.speed) / dt : (speed[ui] - speed[ui - 1]) / dt;
    const Vec2 ego_acc = Vec2{std::cos(heading[ui]), std::sin(heading[ui])} * accel_scalar;

    std::vector<AgentMotion> agents;
    agents.reserve(snap.agents.size());
    for (const AgentState& a : snap.agents) {
      agents.push_back({a.footprint(), a.velocity(), a.accel_vec()});
    }

    frame.nc = no_at_fault_collision(ego_box, ego_vel, agents);
    frame.dac = world.map != nullptr && world.map->footprint_in_drivable_area(ego_box);

    // Stop lines active during the motion interval leading into this step.
    if (world.map != nullptr && world.scenario != nullptr) {
      const int interval_step = snap.step - 1;
      std::vector<ActiveStopLine> lines;
      for (const MapIndex::StopLine& sl : world.map->stop_lines()) {
        lines.push_back({&sl.feature->polyline,
                         world.scenario->signal_at(sl.gated_lane, interval_step) == Signal::STOP});
      }
      const Vec2 from = i == 0 ? plan_origin.position : pos[ui - 1];
      frame.tlc = traffic_light_compliance(from, pos[ui], lines);
    }

    double lateral = 0.0;
    if (world.map != nullptr && !world.map->lanes().empty()) {
      const LaneQuery lq = world.map->query_lane(pos[ui]);
      frame.ddc = driving_direction_compliance(heading[ui], lq.lane_heading);
      lateral = lq.lateral_offset;
    }
    offsets.push_back(lateral);
    const std::size_t window = std::min(offsets.size(), lk_steps);
    frame.lk = lane_keeping(
        std::span<const double>(offsets.data() + offsets.size() - window, window),
        w.lk_offset_threshold);

    // Instantaneous conflict margin against this snapshot; the rollout itself
    // is the forward projection.
    frame.ttc = 1.0;
    for (const AgentMotion& a : agents) {
      const auto m = min_mttc_between(ego_box, ego_vel, ego_acc, a.footprint, a.velocity, a.accel);
      if (m.has_value() && *m < w.ttc_threshold) {
        frame.ttc = 0.0;
        break;
      }
    }

    frame.ec = plan_profile.empty() || comfort_sample_ok(plan_profile[ui + 1]) ? 1.0 : 0.0;
    frame.hc = 1.0;
    if (!seam_profile.empty() && ui < comfort_steps && hist_n + ui < seam_profile.size()) {
      frame.hc = comfort_sample_ok(seam_profile[hist_n + ui]) ? 1.0 : 0.0;
    }

    frame.epdms = epdms_frame(frame, w, ScoreMode::ClosedLoop);
    eval.frames.push_back(frame);

    if (!(frame.nc && frame.dac && frame.tlc && frame.ddc)) {
      eval.first_violation = i;  // this and all later steps contribute nothing
      break;
    }
    eval.rewards[ui] = frame.epdms;
  }
  return eval;
}

double discounted_sum(std::span<const double> rewards, double gamma, int count) {
  const int n = std::min<int>(count, static_cast<int>(rewards.size()));
  double sum = 0.0;
  double g = 1.0;
  for (int i = 0; i < n; ++i) {
    sum += g * rewards[static_cast<std::size_t>(i)];
    g *= gamma;
  }
  return sum;
}

double prefix_reward(const WorldState& world, const CandidatePlan& plan, int k,
                     const RolloutConfig& cfg) {
  const auto snapshots = propagate_world(world, std::max(k, 1), plan.dt, cfg.propagation);
  const PlanEvaluation eval = evaluate_plan(world, plan, world.ego.pose, snapshots, k, cfg);
  return discounted_sum(eval.rewards, cfg.gamma, k);
}

double truncated_q(const WorldState& world, const CandidatePlan& plan,
                   const RolloutConfig& cfg) {
  return prefix_reward(world, plan, cfg.H, cfg);
}

double truncated_q_single_sum(std::span<const double> rewards, double gamma, int H) {
  return discounted_sum(rewards, gamma, H);
}

double truncated_q_three_term(std::span<const double> rewards, double gamma, int k, int H) {
  const int L = static_cast<int>(rewards.size());
  const auto tail_value = [&](int from) {
    double v = 0.0;
    double g = 1.0;
    for (int i = from; i < L; ++i) {
      v += g * rewards[static_cast<std::size_t>(i)];
      g *= gamma;
    }
    return v;
  };
  const auto gamma_pow = [&](int e) {
    double g = 1.0;
    for (int i = 0; i < e; ++i) g *= gamma;
    return g;
  };
  const double r_k = discounted_sum(rewards, gamma, k);
  const double v_k = tail_value(k);
  const double v_h = tail_value(H);
  if (k == H) return r_k + gamma_pow(k) * v_k - gamma_pow(k) * v_k;  // exact cancellation
  return r_k + gamma_pow(k) * v_k - gamma_pow(H) * v_h;
}

// ---------------------------------------------------------------------------
// Candidate selection
// ---------------------------------------------------------------------------

SelectionResult select_candidate(const WorldState& world,
                                 std::span<const CandidatePlan> candidates,
                                 std::span<const WorldSnapshot> snapshots,
                                 const RolloutConfig& cfg) {
  if (candidates.empty()) throw SimulationError("select_candidate: empty candidate set");
  SelectionResult best;
  best.index = -1;
  best.value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const PlanEvaluation eval =
        evaluate_plan(world, candidates[i], world.ego.pose, snapshots, cfg.H, cfg);
    const double value = discounted_sum(eval.rewards, cfg.gamma, cfg.H);
    if (value > best.value) {  // ties keep the lowest candidate id
      best.value = value;
      best.index = static_cast<int>(i);
    }
  }
  return best;
}

std::optional<CandidatePlan> transform_remainder(const CandidatePlan& prev_plan,
                                                 const Pose2& prev_origin, int executed_steps,
                                                 const Pose2& new_ego_pose) {
  if (executed_steps < 0) executed_steps = 0;
  if (executed_steps >= static_cast<int>(prev_plan.waypoints.size())) return std::nullopt;

  CandidatePlan out;
  out.dt = prev_plan.dt;
  out.id = prev_plan.id;
  out.policy_score = prev_plan.policy_score;
  out.waypoints.reserve(prev_plan.waypoints.size() - static_cast<std::size_t>(executed_steps));
  for (std::size_t i = static_cast<std::size_t>(executed_steps); i < prev_plan.waypoints.size();
       ++i) {
    const Vec2 world_pt = from_frame(prev_origin, prev_plan.waypoints[i]);
    out.waypoints.push_back(to_frame(new_ego_pose, world_pt));
  }
  return out;
}

ReplanDecision adaptive_replan(const WorldState& world,
                               const std::optional<CandidatePlan>& remainder,
                               std::span<const CandidatePlan> candidates,
                               std::span<const WorldSnapshot> snapshots,
                               const RolloutConfig& cfg) {
  if (candidates.empty()) throw SimulationError("adaptive_replan: empty candidate set");

  const int cmp_h =
      remainder.has_value()
          ? std::min(static_cast<int>(remainder->waypoints.size()), cfg.H - cfg.k)
          : 0;
  if (remainder.has_value() && cmp_h >= 1) {
    const PlanEvaluation rem_eval =
        evaluate_plan(world, *remainder, world.ego.pose, snapshots, cmp_h, cfg);
    const double q_rem = discounted_sum(rem_eval.rewards, cfg.gamma, cmp_h);

    double best_prefix = -std::numeric_limits<double>::infinity();
    for (const CandidatePlan& cand : candidates) {
      const PlanEvaluation eval = evaluate_plan(world, cand, world.ego.pose, snapshots, cmp_h, cfg);
      best_prefix = std::max(best_prefix, discounted_sum(eval.rewards, cfg.gamma, cmp_h));
    }
    if (q_rem >= best_prefix) {  // "equals or exceeds": ties retain
      return {*remainder, true, -1};
    }
  }

  const SelectionResult sel = select_candidate(world, candidates, snapshots, cfg);
  return {candidates[static_cast<std::size_t>(sel.index)], false, sel.index};
}

}  // namespace bridgesim
