#include "bridgesim/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <nlohmann/json.hpp>

#include "bridgesim/errors.hpp"
#include "bridgesim/rng.hpp"

namespace bridgesim {

using json = nlohmann::json;

std::string to_string(SimMode m) { return m == SimMode::OpenLoop ? "open-loop" : "closed-loop"; }

std::string to_string(ScorerKind s) {
  switch (s) {
    case ScorerKind::NativeBest: return "native";
    case ScorerKind::TruncatedQ: return "truncated-q";
    case ScorerKind::TruncatedQAdaptive: return "truncated-q-replan";
    case ScorerKind::OracleEpdms: return "oracle";
  }
  return "unknown";
}

SimMode sim_mode_from_string(const std::string& s) {
  if (s == "open-loop") return SimMode::OpenLoop;
  if (s == "closed-loop") return SimMode::ClosedLoop;
  throw ValidationError("unknown simulation mode: " + s);
}

ScorerKind scorer_from_string(const std::string& s) {
  if (s == "native") return ScorerKind::NativeBest;
  if (s == "truncated-q") return ScorerKind::TruncatedQ;
  if (s == "truncated-q-replan") return ScorerKind::TruncatedQAdaptive;
  if (s == "oracle") return ScorerKind::OracleEpdms;
  throw ValidationError("unknown scorer: " + s);
}

int EngineConfig::warmup_steps() const {
  return std::max(0, static_cast<int>(std::lround(warmup / sim_dt)));
}

std::string EngineConfig::to_json() const {
  json j;
  j["mode"] = to_string(mode);
  j["traffic"] = to_string(traffic);
  j["sim_dt"] = sim_dt;
  j["replan_rate"] = replan_rate;
  j["horizon_steps"] = horizon_steps;
  j["warmup"] = warmup;
  j["scorer"] = to_string(scorer);
  j["rollout"] = {{"k", rollout.k},
                  {"H", rollout.H},
                  {"gamma", rollout.gamma},
                  {"propagation", to_string(rollout.propagation)}};
  j["weights"] = {{"ttc", weights.w_ttc},
                  {"ep", weights.w_ep},
                  {"lk", weights.w_lk},
                  {"hc", weights.w_hc},
                  {"ec", weights.w_ec},
                  {"accel_max", weights.accel_max},
                  {"jerk_max", weights.jerk_max},
                  {"yawrate_max", weights.yawrate_max},
                  {"ttc_threshold", weights.ttc_threshold},
                  {"ttc_projection", weights.ttc_projection},
                  {"lk_offset_threshold", weights.lk_offset_threshold},
                  {"lk_window", weights.lk_window},
                  {"comfort_window", weights.comfort_window}};
  j["seed"] = seed;
  j["terminate_on_collision"] = terminate_on_collision;
  j["strict_collision"] = strict_collision;
  // threads is a runtime knob, not part of the run's semantics: reports must
  // be byte-identical across worker counts.
  j["adversary"] = {{"trigger", adversary.trigger == AdversaryScript::Trigger::TimeAt
                                    ? "time-at"
                                    : "ego-gap-below"},
                    {"trigger_value", adversary.trigger_value},
                    {"maneuver", adversary.maneuver == AdversaryScript::Maneuver::HardBrake
                                     ? "hard-brake"
                                     : "cut-in"},
                    {"decel", adversary.decel},
                    {"cut_lateral", adversary.cut_lateral},
                    {"cut_duration", adversary.cut_duration}};
  j["adversary_agent"] = adversary_agent;
  return j.dump();
}

EngineConfig EngineConfig::from_json(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed engine config: ") + e.what());
  }
  EngineConfig cfg;
  try {
    if (j.contains("mode")) cfg.mode = sim_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("traffic")) {
      cfg.traffic = traffic_mode_from_string(j.at("traffic").get<std::string>());
    }
    cfg.sim_dt = j.value("sim_dt", cfg.sim_dt);
    cfg.replan_rate = j.value("replan_rate", cfg.replan_rate);
    cfg.horizon_steps = j.value("horizon_steps", cfg.horizon_steps);
    cfg.warmup = j.value("warmup", cfg.warmup);
    if (j.contains("scorer")) cfg.scorer = scorer_from_string(j.at("scorer").get<std::string>());
    bool k_overridden = false;
    if (j.contains("rollout")) {
      const json& r = j.at("rollout");
      if (r.contains("k")) {
        cfg.rollout.k = r.at("k").get<int>();
        k_overridden = true;
      }
      cfg.rollout.H = r.value("H", cfg.rollout.H);
      cfg.rollout.gamma = r.value("gamma", cfg.rollout.gamma);
      if (r.contains("propagation")) {
        cfg.rollout.propagation = propagation_from_string(r.at("propagation").get<std::string>());
      }
    }
    if (!k_overridden) cfg.rollout.k = cfg.replan_rate;
    if (j.contains("weights")) {
      const json& w = j.at("weights");
      cfg.weights.w_ttc = w.value("ttc", cfg.weights.w_ttc);
      cfg.weights.w_ep = w.value("ep", cfg.weights.w_ep);
      cfg.weights.w_lk = w.value("lk", cfg.weights.w_lk);
      cfg.weights.w_hc = w.value("hc", cfg.weights.w_hc);
      cfg.weights.w_ec = w.value("ec", cfg.weights.w_ec);
      cfg.weights.accel_max = w.value("accel_max", cfg.weights.accel_max);
      cfg.weights.jerk_max = w.value("jerk_max", cfg.weights.jerk_max);
      cfg.weights.yawrate_max = w.value("yawrate_max", cfg.weights.yawrate_max);
      cfg.weights.ttc_threshold = w.value("ttc_threshold", cfg.weights.ttc_threshold);
      cfg.weights.ttc_projection = w.value("ttc_projection", cfg.weights.ttc_projection);
      cfg.weights.lk_offset_threshold =
          w.value("lk_offset_threshold", cfg.weights.lk_offset_threshold);
      cfg.weights.lk_window = w.value("lk_window", cfg.weights.lk_window);
      cfg.weights.comfort_window = w.value("comfort_window", cfg.weights.comfort_window);
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.terminate_on_collision = j.value("terminate_on_collision", cfg.terminate_on_collision);
    cfg.strict_collision = j.value("strict_collision", cfg.strict_collision);
    cfg.threads = j.value("threads", cfg.threads);
    if (j.contains("adversary")) {
      const json& a = j.at("adversary");
      if (a.contains("trigger")) {
        const std::string t = a.at("trigger").get<std::string>();
        if (t == "time-at") {
          cfg.adversary.trigger = AdversaryScript::Trigger::TimeAt;
        } else if (t == "ego-gap-below") {
          cfg.adversary.trigger = AdversaryScript::Trigger::EgoGapBelow;
        } else {
          throw ValidationError("unknown adversary trigger: " + t);
        }
      }
      cfg.adversary.trigger_value = a.value("trigger_value", cfg.adversary.trigger_value);
      if (a.contains("maneuver")) {
        const std::string m = a.at("maneuver").get<std::string>();
        if (m == "hard-brake") {
          cfg.adversary.maneuver = AdversaryScript::Maneuver::HardBrake;
        } else if (m == "cut-in") {
          cfg.adversary.maneuver = AdversaryScript::Maneuver::CutIn;
        } else {
          throw ValidationError("unknown adversary maneuver: " + m);
        }
      }
      cfg.adversary.decel = a.value("decel", cfg.adversary.decel);
      cfg.adversary.cut_lateral = a.value("cut_lateral", cfg.adversary.cut_lateral);
      cfg.adversary.cut_duration = a.value("cut_duration", cfg.adversary.cut_duration);
    }
    cfg.adversary_agent = j.value("adversary_agent", cfg.adversary_agent);
  } catch (const json::exception& e) {
    throw ParseError(std::string("engine config missing or mistyped field: ") + e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Episode helpers
// ---------------------------------------------------------------------------

namespace {

EgoState ego_from_log(const Track& track, int step, double dt) {
  const TrackState& st = track.states[static_cast<std::size_t>(step)];
  EgoState ego;
  ego.pose = st.pose;
  const Vec2 fwd{std::cos(st.pose.heading), std::sin(st.pose.heading)};
  ego.speed = st.velocity.dot(fwd);
  if (step > 0 && track.states[static_cast<std::size_t>(step - 1)].valid) {
    const TrackState& prev = track.states[static_cast<std::size_t>(step - 1)];
    const Vec2 pfwd{std::cos(prev.pose.heading), std::sin(prev.pose.heading)};
    ego.accel = (ego.speed - prev.velocity.dot(pfwd)) / dt;
    ego.yaw_rate = angle_diff(st.pose.heading, prev.pose.heading) / dt;
  }
  return ego;
}

HistorySample history_sample(const EgoState& ego, const MapIndex& map) {
  HistorySample s;
  s.pose = ego.pose;
  s.speed = ego.speed;
  s.accel = ego.accel;
  s.yaw_rate = ego.yaw_rate;
  s.lateral_offset =
      map.lanes().empty() ? 0.0 : map.query_lane(ego.pose.position).lateral_offset;
  return s;
}

// Logged ego poses/speeds for steps t+1..t+H, constant-velocity extrapolated
// past the end of the log.
void expert_future(const ScenarioDescription& scenario, const Track& ego_track, int t, int horizon,
                   std::vector<Pose2>& poses, std::vector<double>& speeds) {
  poses.clear();
  speeds.clear();
  const int last = scenario.step_count - 1;
  for (int i = 1; i <= horizon; ++i) {
    const int step = t + i;
    if (step <= last && ego_track.states[static_cast<std::size_t>(step)].valid) {
      const TrackState& st = ego_track.states[static_cast<std::size_t>(step)];
      const Vec2 fwd{std::cos(st.pose.heading), std::sin(st.pose.heading)};
      poses.push_back(st.pose);
      speeds.push_back(st.velocity.dot(fwd));
    } else {
      const TrackState& st = ego_track.states[static_cast<std::size_t>(std::min(t + i, last))];
      Pose2 base = poses.empty() ? st.pose : poses.back();
      const double v = speeds.empty() ? st.velocity.norm() : speeds.back();
      base.position += Vec2{std::cos(base.heading), std::sin(base.heading)} * (v * scenario.dt);
      poses.push_back(base);
      speeds.push_back(v);
    }
  }
}

std::vector<AgentMotion> agent_motions(const std::vector<AgentState>& agents) {
  std::vector<AgentMotion> out;
  out.reserve(agents.size());
  for (const AgentState& a : agents) out.push_back({a.footprint(), a.velocity(), a.accel_vec()});
  return out;
}

std::vector<ActiveStopLine> active_stop_lines(const ScenarioDescription& scenario,
                                              const MapIndex& map, int interval_step) {
  std::vector<ActiveStopLine> lines;
  for (const MapIndex::StopLine& sl : map.stop_lines()) {
    lines.push_back({&sl.feature->polyline,
                     scenario.signal_at(sl.gated_lane, interval_step) == Signal::STOP});
  }
  return lines;
}

FrameScore score_realized_frame(const WorldState& world, const Vec2& prev_position,
                                const EngineConfig& cfg) {
  const ScorerWeights& w = cfg.weights;
  FrameScore frame;
  const OrientedBox ego_box = world.ego_footprint();
  const Vec2 ego_vel =
      Vec2{std::cos(world.ego.pose.heading), std::sin(world.ego.pose.heading)} * world.ego.speed;
  const Vec2 ego_acc =
      Vec2{std::cos(world.ego.pose.heading), std::sin(world.ego.pose.heading)} * world.ego.accel;
  const std::vector<AgentMotion> agents = agent_motions(world.agents);

  frame.nc = no_at_fault_collision(ego_box, ego_vel, agents, cfg.strict_collision);
  frame.dac = world.map->footprint_in_drivable_area(ego_box);
  frame.tlc = traffic_light_compliance(
      prev_position, world.ego.pose.position,
      active_stop_lines(*world.scenario, *world.map, world.step - 1));
  if (!world.map->lanes().empty()) {
    const LaneQuery lq = world.map->query_lane(world.ego.pose.position);
    frame.ddc = driving_direction_compliance(world.ego.pose.heading, lq.lane_heading);
  }

  const std::size_t lk_steps = static_cast<std::size_t>(std::lround(w.lk_window / cfg.sim_dt));
  const std::vector<double> offsets = world.history.trailing_offsets(lk_steps);
  frame.lk = lane_keeping(offsets, w.lk_offset_threshold);

  frame.ttc = ttc_feature(ego_box, ego_vel, ego_acc, agents, w);

  // Realized comfort: EC gates the newest kinematic sample, HC the trailing
  // comfort window.
  const std::size_t comfort_steps =
      static_cast<std::size_t>(std::lround(w.comfort_window / cfg.sim_dt));
  const std::vector<Vec2> positions = world.history.trailing_positions(comfort_steps + 2);
  const auto profile = kinematic_profile(positions, cfg.sim_dt);
  if (!profile.empty()) {
    const auto ok = [&w](const KinematicSample& s) {
      return s.accel <= w.accel_max && s.jerk <= w.jerk_max && s.yaw_rate <= w.yawrate_max;
    };
    frame.ec = ok(profile.back()) ? 1.0 : 0.0;
    const std::size_t from = profile.size() > comfort_steps ? profile.size() - comfort_steps : 0;
    frame.hc = 1.0;
    for (std::size_t i = from; i < profile.size(); ++i) {
      if (!ok(profile[i])) {
        frame.hc = 0.0;
        break;
      }
    }
  }

  frame.epdms = epdms_frame(frame, w, ScoreMode::ClosedLoop);
  return frame;
}

Polyline expert_route(const Track& ego_track, int from_step, int to_step) {
  std::vector<Vec2> pts;
  for (int t = from_step; t <= to_step; ++t) {
    const TrackState& st = ego_track.states[static_cast<std::size_t>(t)];
    if (st.valid) pts.push_back(st.pose.position);
  }
  if (pts.size() < 2) pts.resize(2, pts.empty() ? Vec2{} : pts.front());
  return Polyline(std::move(pts));
}

void require_episode_fits(const ScenarioDescription& scenario, const EngineConfig& cfg) {
  const int needed = cfg.warmup_steps() + cfg.horizon_steps + 1;
  if (scenario.step_count < needed) {
    throw SimulationError("scenario '" + scenario.id + "' has " +
                          std::to_string(scenario.step_count) + " steps, needs >= " +
                          std::to_string(needed) + " for warmup + horizon");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Open loop
// ---------------------------------------------------------------------------

EpisodeReport run_open_loop(const ScenarioDescription& scenario, Policy& policy,
                            const EngineConfig& cfg) {
  require_episode_fits(scenario, cfg);
  const auto t_begin = std::chrono::steady_clock::now();

  const MapIndex map(scenario);
  const Track& ego_track = scenario.ego_track();
  const int warmup = cfg.warmup_steps();
  const int T = cfg.horizon_steps;
  const int H = cfg.rollout.H;
  const double dt = cfg.sim_dt;

  RolloutConfig rollout = cfg.rollout;
  rollout.weights = cfg.weights;

  const Polyline route = expert_route(ego_track, warmup, warmup + T);
  std::vector<double> log_arclength(static_cast<std::size_t>(scenario.step_count), 0.0);
  for (int t = 0; t < scenario.step_count; ++t) {
    const TrackState& st = ego_track.states[static_cast<std::size_t>(t)];
    if (st.valid) log_arclength[static_cast<std::size_t>(t)] = route.project(st.pose.position).arclength;
  }

  WorldState world;
  world.scenario = &scenario;
  world.map = &map;
  world.ego_dims = ego_track.dims;
  world.history = HistoryBuffer(128);

  EpisodeReport report;
  report.scenario_id = scenario.id;
  report.policy = policy.name();
  report.mode = to_string(SimMode::OpenLoop);
  report.seed = cfg.seed;
  report.config_echo = cfg.to_json();

  double ade_sum = 0.0;
  int tick_count = 0;

  for (int t = 0; t <= warmup + T; ++t) {
    world.step = t;
    world.ego = ego_from_log(ego_track, t, dt);
    world.agents = replay_step(scenario, t);
    world.history.push(history_sample(world.ego, map));
    report.ego_trace.push_back(world.ego.pose.position);

    const bool in_eval = t >= warmup && t < warmup + T;
    if (!in_eval || (t - warmup) % cfg.replan_rate != 0) continue;

    Observation obs;
    obs.world = &world;
    obs.route = &route;
    obs.horizon = H;
    obs.plan_dt = dt;
    expert_future(scenario, ego_track, t, H, obs.expert_future, obs.expert_speeds);
    const PolicyOutput out = policy.propose(obs);
    if (out.candidates.empty()) throw SimulationError("policy returned no candidates");

    // minADE over all candidates against the logged future.
    std::vector<std::vector<Vec2>> world_candidates;
    world_candidates.reserve(out.candidates.size());
    for (const CandidatePlan& c : out.candidates) {
      std::vector<Vec2> pts;
      pts.reserve(c.waypoints.size());
      for (const Vec2& wp : c.waypoints) pts.push_back(from_frame(world.ego.pose, wp));
      world_candidates.push_back(std::move(pts));
    }
    std::vector<Vec2> gt;
    gt.reserve(obs.expert_future.size());
    for (const Pose2& p : obs.expert_future) gt.push_back(p.position);
    ade_sum += min_ade(world_candidates, gt);

    // Score the policy's own choice against the replayed future.
    const CandidatePlan& chosen = out.candidates[static_cast<std::size_t>(out.native_best)];
    const auto snapshots = replay_snapshots(world, H);
    const PlanEvaluation eval = evaluate_plan(world, chosen, world.ego.pose, snapshots, H, rollout);

    FrameScore tick;
    tick.lk = 1.0;
    tick.ttc = 1.0;
    tick.hc = 1.0;
    tick.ec = 1.0;
    for (const FrameScore& f : eval.frames) {
      tick.nc = tick.nc && f.nc;
      tick.dac = tick.dac && f.dac;
      tick.tlc = tick.tlc && f.tlc;
      tick.ddc = tick.ddc && f.ddc;
      tick.lk = std::min(tick.lk, f.lk);
      tick.ttc = std::min(tick.ttc, f.ttc);
      tick.hc = std::min(tick.hc, f.hc);
      tick.ec = std::min(tick.ec, f.ec);
    }
    double achieved = 0.0;
    if (!world_candidates[static_cast<std::size_t>(out.native_best)].empty()) {
      const Vec2 end = world_candidates[static_cast<std::size_t>(out.native_best)].back();
      achieved = route.project(end).arclength - log_arclength[static_cast<std::size_t>(t)];
    }
    const int end_step = std::min(t + H, scenario.step_count - 1);
    const double expert_progress =
        log_arclength[static_cast<std::size_t>(end_step)] - log_arclength[static_cast<std::size_t>(t)];
    tick.ep = ego_progress(achieved, expert_progress);
    tick.epdms = epdms_frame(tick, cfg.weights, ScoreMode::OpenLoop);
    report.frames.push_back(tick);
    ++tick_count;
  }

  report.rc = 1.0;  // the ego is on rails
  double epdms_sum = 0.0;
  for (const FrameScore& f : report.frames) epdms_sum += f.epdms;
  report.epdms_mean =
      report.frames.empty() ? 0.0 : 100.0 * epdms_sum / static_cast<double>(report.frames.size());
  report.ds = report.epdms_mean;
  report.means = subscore_means(report.frames);
  report.min_ade = tick_count > 0 ? ade_sum / tick_count : 0.0;
  report.end_step = warmup + T;
  report.wallclock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  return report;
}

// ---------------------------------------------------------------------------
// Closed loop
// ---------------------------------------------------------------------------

EpisodeReport run_closed_loop(const ScenarioDescription& scenario, Policy& policy,
                              const EngineConfig& cfg) {
  require_episode_fits(scenario, cfg);
  const auto t_begin = std::chrono::steady_clock::now();

  const MapIndex map(scenario);
  const Track& ego_track = scenario.ego_track();
  const int warmup = cfg.warmup_steps();
  const int T = cfg.horizon_steps;
  const int H = cfg.rollout.H;
  const double dt = cfg.sim_dt;

  RolloutConfig rollout = cfg.rollout;
  rollout.weights = cfg.weights;

  const Polyline route = expert_route(ego_track, warmup, warmup + T);

  EpisodeReport report;
  report.scenario_id = scenario.id;
  report.policy = policy.name();
  report.mode = to_string(SimMode::ClosedLoop);
  report.seed = cfg.seed;
  report.config_echo = cfg.to_json();

  WorldState world;
  world.scenario = &scenario;
  world.map = &map;
  world.ego_dims = ego_track.dims;
  world.history = HistoryBuffer(128);

  // Warm-up: replay the log to fill the history buffer.
  world.step = 0;
  world.ego = ego_from_log(ego_track, 0, dt);
  world.agents = replay_step(scenario, 0);
  world.history.push(history_sample(world.ego, map));
  report.ego_trace.push_back(world.ego.pose.position);
  for (int t = 0; t < warmup; ++t) {
    world.step = t + 1;
    world.ego = ego_from_log(ego_track, t + 1, dt);
    world.agents = replay_step(scenario, t + 1);
    world.history.push(history_sample(world.ego, map));
    report.ego_trace.push_back(world.ego.pose.position);
  }

  // Traffic-mode setup at the end of warm-up.
  IdmParams idm_params;
  if (cfg.traffic == TrafficMode::Idm) {
    for (AgentState& a : world.agents) {
      if (!map.lanes().empty()) a.lane_id = map.query_lane(a.pose.position).lane_id;
    }
  }
  std::string adversary_id = cfg.adversary_agent;
  AdversaryState adversary_state;
  if (cfg.traffic == TrafficMode::Adversarial && adversary_id.empty()) {
    double best = std::numeric_limits<double>::infinity();
    for (const AgentState& a : world.agents) {
      const Vec2 local = to_frame(world.ego.pose, a.pose.position);
      if (local.x > 0.0 && local.x < best) {
        best = local.x;
        adversary_id = a.object_id;
      }
    }
  }

  // Plan cache.
  CachedPlan cached;
  CandidatePlan active_plan;  // ego-frame waypoints of the cached plan
  Pose2 plan_origin;
  int plan_started_step = -1;
  bool have_plan = false;
  PidState pid;

  double furthest = 0.0;
  const double route_total = route.length();

  for (int t = warmup; t < warmup + T; ++t) {
    if ((t - warmup) % cfg.replan_rate == 0) {
      Observation obs;
      obs.world = &world;
      obs.route = &route;
      obs.horizon = H;
      obs.plan_dt = dt;
      expert_future(scenario, ego_track, t, H, obs.expert_future, obs.expert_speeds);
      const PolicyOutput out = policy.propose(obs);
      if (out.candidates.empty()) throw SimulationError("policy returned no candidates");

      CandidatePlan chosen;
      switch (cfg.scorer) {
        case ScorerKind::NativeBest: {
          chosen = out.candidates[static_cast<std::size_t>(out.native_best)];
          break;
        }
        case ScorerKind::TruncatedQ: {
          const auto snapshots = propagate_world(world, H, dt, rollout.propagation);
          const SelectionResult sel = select_candidate(world, out.candidates, snapshots, rollout);
          chosen = out.candidates[static_cast<std::size_t>(sel.index)];
          break;
        }
        case ScorerKind::TruncatedQAdaptive: {
          const auto snapshots = propagate_world(world, H, dt, rollout.propagation);
          std::optional<CandidatePlan> remainder;
          if (have_plan && plan_started_step >= 0) {
            const int executed = t - plan_started_step;
            remainder = transform_remainder(active_plan, plan_origin, executed, world.ego.pose);
            // Not worth retaining when it cannot survive until the next tick.
            if (remainder.has_value() &&
                static_cast<int>(remainder->waypoints.size()) <= cfg.replan_rate) {
              remainder.reset();
            }
          }
          const ReplanDecision decision =
              adaptive_replan(world, remainder, out.candidates, snapshots, rollout);
          chosen = decision.chosen;
          break;
        }
        case ScorerKind::OracleEpdms: {
          const auto snapshots = replay_snapshots(world, H);
          const SelectionResult sel = select_candidate(world, out.candidates, snapshots, rollout);
          chosen = out.candidates[static_cast<std::size_t>(sel.index)];
          break;
        }
      }

      active_plan = chosen;
      plan_origin = world.ego.pose;
      plan_started_step = t;
      have_plan = true;
      cached.waypoints = chosen.waypoints;
      cached.dt = chosen.dt;
      cached.origin = plan_origin;
    }

    // Consume the cached plan.
    const double elapsed = (t - plan_started_step) * dt;
    const TrackResult tracked = track_plan(world.ego, cached, elapsed, cfg.tracking, pid, dt);
    ControlCommand cmd = tracked.command;
    pid = tracked.pid;
    if (tracked.status == TrackStatus::EndOfPlan) {
      cmd = ControlCommand{-cfg.tracking.plan_end_brake, 0.0}.saturated();
      report.emergency_brake_used = true;
    }

    const Vec2 prev_position = world.ego.pose.position;
    const EgoState next_ego = step_bicycle(world.ego, cmd, dt);

    // Background traffic reads the previous-step snapshot.
    std::vector<AgentState> next_agents;
    switch (cfg.traffic) {
      case TrafficMode::LogReplay: {
        next_agents = replay_step(scenario, t + 1);
        break;
      }
      case TrafficMode::Idm: {
        next_agents.reserve(world.agents.size());
        for (const AgentState& a : world.agents) {
          next_agents.push_back(idm_agent_step(world, a, idm_params, dt));
        }
        break;
      }
      case TrafficMode::Adversarial: {
        next_agents.reserve(world.agents.size());
        for (const AgentState& a : world.agents) {
          if (a.object_id == adversary_id) {
            next_agents.push_back(adversary_step(world, a, cfg.adversary, adversary_state, dt));
          } else {
            bool replayed = false;
            for (AgentState& r : replay_step(scenario, t + 1)) {
              if (r.object_id == a.object_id) {
                next_agents.push_back(std::move(r));
                replayed = true;
                break;
              }
            }
            if (!replayed) next_agents.push_back(a);
          }
        }
        break;
      }
    }

    world.step = t + 1;
    world.ego = next_ego;
    world.agents = std::move(next_agents);
    world.history.push(history_sample(world.ego, map));
    report.ego_trace.push_back(world.ego.pose.position);

    const FrameScore frame = score_realized_frame(world, prev_position, cfg);
    report.frames.push_back(frame);

    furthest = std::max(furthest, route.project(world.ego.pose.position).arclength);

    if (cfg.terminate_on_collision && !frame.nc) {
      report.collision_terminated = true;
      break;
    }
    if (route_total > 1e-9 && furthest >= route_total - 1e-6) {
      report.route_completed_early = true;
      break;
    }
  }

  report.rc = route_total > 1e-9 ? std::clamp(furthest / route_total, 0.0, 1.0) : 1.0;
  report.ds = closed_loop_score(report.rc, report.frames);
  double epdms_sum = 0.0;
  for (const FrameScore& f : report.frames) epdms_sum += f.epdms;
  report.epdms_mean =
      report.frames.empty() ? 0.0 : 100.0 * epdms_sum / static_cast<double>(report.frames.size());
  report.means = subscore_means(report.frames);
  report.end_step = world.step;
  report.wallclock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  return report;
}

EpisodeReport run_episode(const ScenarioDescription& scenario, Policy& policy,
                          const EngineConfig& cfg, std::uint64_t episode_index) {
  policy.reset(CounterRng::derive(cfg.seed, episode_index));
  return cfg.mode == SimMode::OpenLoop ? run_open_loop(scenario, policy, cfg)
                                       : run_closed_loop(scenario, policy, cfg);
}

int resolve_thread_count(const EngineConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  if (const char* env = std::getenv("BRIDGESIM_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

std::vector<EpisodeReport> run_suite(std::span<const ScenarioDescription> scenarios,
                                     const PolicyFactory& make_policy, const EngineConfig& cfg) {
  if (scenarios.empty()) throw SimulationError("run_suite: needs at least one scenario");
  std::vector<EpisodeReport> reports(scenarios.size());

  const int workers =
      std::max(1, std::min<int>(resolve_thread_count(cfg), static_cast<int>(scenarios.size())));
  std::atomic<std::size_t> next{0};

  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= scenarios.size()) return;
      try {
        auto policy = make_policy();
        reports[i] = run_episode(scenarios[i], *policy, cfg, static_cast<std::uint64_t>(i));
      } catch (const std::exception& e) {
        reports[i] = EpisodeReport{};
        reports[i].scenario_id = scenarios[i].id;
        reports[i].seed = cfg.seed;
        reports[i].error = e.what();
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  return reports;
}

}  // namespace bridgesim
