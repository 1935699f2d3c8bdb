#include <doctest.h>

#include <cmath>

#include "bridgesim/rng.hpp"
#include "bridgesim/tta.hpp"

using namespace bridgesim;

namespace {

// Empty straight world with a wide drivable area: every sensible plan scores
// a clean reward at every step.
struct RolloutFixture {
  ScenarioDescription scenario;
  MapIndex map;
  WorldState world;

  RolloutFixture() {
    scenario.id = "tta-fixture";
    scenario.step_count = 400;
    scenario.ego_track_id = "ego";
    MapFeature lane;
    lane.id = "lane_0";
    lane.kind = FeatureKind::LaneCenter;
    for (double x = -20.0; x <= 600.0; x += 2.0) lane.polyline.push_back({x, 0.0});
    scenario.map_features.push_back(lane);
    MapFeature ring;
    ring.id = "drivable";
    ring.kind = FeatureKind::DrivableArea;
    ring.polyline = {{-50, -8}, {650, -8}, {650, 8}, {-50, 8}};
    scenario.map_features.push_back(ring);
    Track ego;
    ego.object_id = "ego";
    ego.object_type = ObjectType::Ego;
    ego.dims = {4.6, 1.9, 1.6};
    TrackState st;
    st.valid = true;
    st.velocity = {5.0, 0.0};
    ego.states.assign(static_cast<std::size_t>(scenario.step_count), st);
    scenario.tracks.push_back(ego);

    map = MapIndex(scenario);
    world.scenario = &scenario;
    world.map = &map;
    world.ego_dims = ego.dims;
    world.ego.speed = 5.0;
    for (int i = 0; i < 20; ++i) {
      HistorySample h;
      h.pose.position = {0.5 * (i - 19), 0.0};  // ends at the ego origin
      h.speed = 5.0;
      world.history.push(h);
    }
  }

  CandidatePlan straight_plan(int H, double v = 5.0, int id = 0) const {
    CandidatePlan p;
    p.dt = 0.1;
    p.id = id;
    for (int i = 1; i <= H; ++i) p.waypoints.push_back({v * 0.1 * i, 0.0});
    return p;
  }
};

}  // namespace

TEST_CASE("propagate_world constant velocity") {
  RolloutFixture fx;
  AgentState a;
  a.object_id = "a";
  a.pose.position = {0.0, 0.0};
  a.speed = 5.0;
  a.dims = {4.0, 2.0, 1.5};
  fx.world.agents = {a};
  const auto snaps = propagate_world(fx.world, 10, 0.1, Propagation::ConstantVelocity);
  REQUIRE(snaps.size() == 10);
  CHECK(snaps.back().agents[0].pose.position.x == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(snaps.back().step == fx.world.step + 10);
}

TEST_CASE("propagate_world keeps zero-velocity agents in place") {
  RolloutFixture fx;
  AgentState a;
  a.object_id = "a";
  a.pose.position = {3.0, 1.0};
  a.speed = 0.0;
  fx.world.agents = {a};
  for (const auto& snap : propagate_world(fx.world, 5, 0.1, Propagation::ConstantVelocity)) {
    CHECK(snap.agents[0].pose.position == Vec2{3.0, 1.0});
  }
}

TEST_CASE("propagate_world constant acceleration matches the decay integral") {
  // a(t) = 2 * (1 - t) over 1 s from rest: v(t) = 2t - t^2, so displacement
  // after 1 s is 1 - 1/3 = 2/3. Oracle: fine-step numeric integration.
  RolloutFixture fx;
  AgentState a;
  a.object_id = "a";
  a.speed = 0.0;
  a.accel = 2.0;
  fx.world.agents = {a};
  const auto snaps = propagate_world(fx.world, 10, 0.1, Propagation::ConstantAcceleration);

  double v = 0.0, x = 0.0;
  const double h = 1e-5;
  for (double t = 0.0; t < 1.0 - h / 2; t += h) {
    const double a0 = 2.0 * (1.0 - t);
    const double a1 = 2.0 * (1.0 - (t + h));
    const double v1 = v + 0.5 * (a0 + a1) * h;
    x += 0.5 * (v + v1) * h;
    v = v1;
  }
  CHECK(std::abs(snaps.back().agents[0].pose.position.x - x) < 1e-3);
  CHECK(x == doctest::Approx(2.0 / 3.0).epsilon(1e-4));  // sanity on the oracle itself
}

TEST_CASE("prefix_reward geometric sums on a clean plan") {
  RolloutFixture fx;
  const CandidatePlan plan = fx.straight_plan(40);
  RolloutConfig cfg;
  cfg.weights = ScorerWeights{};
  SUBCASE("gamma 1") {
    cfg.gamma = 1.0;
    CHECK(prefix_reward(fx.world, plan, 4, cfg) == doctest::Approx(4.0).epsilon(1e-9));
  }
  SUBCASE("gamma 0.9 over 3 steps") {
    cfg.gamma = 0.9;
    CHECK(prefix_reward(fx.world, plan, 3, cfg) == doctest::Approx(2.71).epsilon(1e-9));
  }
}

TEST_CASE("plan leaving the drivable area at step 0 scores zero") {
  RolloutFixture fx;
  CandidatePlan plan;
  plan.dt = 0.1;
  for (int i = 1; i <= 40; ++i) plan.waypoints.push_back({0.5 * i, 40.0});  // far off-road
  RolloutConfig cfg;
  CHECK(prefix_reward(fx.world, plan, 40, cfg) == doctest::Approx(0.0));
}

TEST_CASE("gate zeroes the violation step and everything after it") {
  RolloutFixture fx;
  // Agent parked where the plan arrives near step 30.
  AgentState parked;
  parked.object_id = "p";
  parked.pose.position = {15.0, 0.0};
  parked.speed = 0.0;
  parked.dims = {4.0, 2.0, 1.5};
  fx.world.agents = {parked};

  const CandidatePlan plan = fx.straight_plan(40);
  RolloutConfig cfg;
  cfg.gamma = 1.0;
  cfg.H = 40;
  const auto snaps = propagate_world(fx.world, 40, 0.1, cfg.propagation);
  const PlanEvaluation eval = evaluate_plan(fx.world, plan, fx.world.ego.pose, snaps, 40, cfg);
  REQUIRE(eval.first_violation >= 0);
  for (int i = eval.first_violation; i < 40; ++i) {
    CHECK(eval.rewards[static_cast<std::size_t>(i)] == 0.0);
  }
  // TTC fails before the crash, so rewards decline before the hard zero.
  CHECK(eval.rewards[0] > 0.0);
}

TEST_CASE("Eq.6 identity: three-term equals single-sum") {
  CounterRng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int H = 2 + rng.uniform_int(59);
    const int L = H + rng.uniform_int(21);
    const int k = 1 + rng.uniform_int(H);
    const double gamma = rng.uniform(0.5, 1.0);
    std::vector<double> rewards;
    rewards.reserve(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i) rewards.push_back(rng.next_double());
    const double three = truncated_q_three_term(rewards, gamma, k, H);
    const double single = truncated_q_single_sum(rewards, gamma, H);
    CHECK(std::abs(three - single) < 1e-12);
  }
}

TEST_CASE("Eq.6 degeneracy: k == H collapses exactly") {
  CounterRng rng(7);
  std::vector<double> rewards;
  for (int i = 0; i < 50; ++i) rewards.push_back(rng.next_double());
  const double three = truncated_q_three_term(rewards, 0.97, 30, 30);
  const double single = truncated_q_single_sum(rewards, 0.97, 30);
  CHECK(three == single);  // bitwise
}

TEST_CASE("truncated_q equals prefix_reward at k = H") {
  RolloutFixture fx;
  const CandidatePlan plan = fx.straight_plan(40);
  RolloutConfig cfg;
  cfg.H = 40;
  CHECK(truncated_q(fx.world, plan, cfg) == prefix_reward(fx.world, plan, 40, cfg));
}

TEST_CASE("gate monotonicity: inserting a violation cannot raise the value") {
  CounterRng rng(15);
  for (int trial = 0; trial < 200; ++trial) {
    const int H = 10 + rng.uniform_int(30);
    std::vector<double> rewards;
    for (int i = 0; i < H; ++i) rewards.push_back(rng.next_double());
    const double gamma = rng.uniform(0.1, 1.0);
    const int j = rng.uniform_int(H);
    std::vector<double> gated = rewards;
    for (int i = j; i < H; ++i) gated[static_cast<std::size_t>(i)] = 0.0;
    CHECK(truncated_q_single_sum(gated, gamma, H) <=
          truncated_q_single_sum(rewards, gamma, H) + 1e-15);
  }
}

TEST_CASE("select_candidate prefers the clean plan and breaks ties by id") {
  RolloutFixture fx;
  RolloutConfig cfg;
  cfg.H = 40;

  SUBCASE("single candidate") {
    const std::vector<CandidatePlan> cands{fx.straight_plan(40)};
    const auto snaps = propagate_world(fx.world, 40, 0.1, cfg.propagation);
    CHECK(select_candidate(fx.world, cands, snaps, cfg).index == 0);
  }
  SUBCASE("clean beats colliding") {
    AgentState parked;
    parked.object_id = "p";
    parked.pose.position = {10.0, 3.5};  // on the left, in the path of plan B
    parked.speed = 0.0;
    parked.dims = {4.0, 2.0, 1.5};
    fx.world.agents = {parked};

    CandidatePlan clean = fx.straight_plan(40, 5.0, 0);
    CandidatePlan crash = fx.straight_plan(40, 5.0, 1);
    for (auto& wp : crash.waypoints) wp.y = 3.5;  // drives through the parked car
    const std::vector<CandidatePlan> cands{crash, clean};
    const auto snaps = propagate_world(fx.world, 40, 0.1, cfg.propagation);
    CHECK(select_candidate(fx.world, cands, snaps, cfg).index == 1);
  }
  SUBCASE("identical candidates tie to the lowest id") {
    const std::vector<CandidatePlan> cands{fx.straight_plan(40, 5.0, 0),
                                           fx.straight_plan(40, 5.0, 1),
                                           fx.straight_plan(40, 5.0, 2)};
    const auto snaps = propagate_world(fx.world, 40, 0.1, cfg.propagation);
    CHECK(select_candidate(fx.world, cands, snaps, cfg).index == 0);
  }
}

TEST_CASE("argmax is invariant under common positive scaling") {
  // Scaling all rewards by c > 0 scales every discounted sum by c.
  CounterRng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int H = 10;
    std::vector<std::vector<double>> all;
    for (int c = 0; c < 5; ++c) {
      std::vector<double> r;
      for (int i = 0; i < H; ++i) r.push_back(rng.next_double());
      all.push_back(std::move(r));
    }
    const double gamma = rng.uniform(0.5, 1.0);
    const double scale = rng.uniform(0.1, 9.0);
    int best_raw = 0, best_scaled = 0;
    double raw_v = -1.0, scaled_v = -1.0;
    for (int c = 0; c < 5; ++c) {
      const double v = truncated_q_single_sum(all[static_cast<std::size_t>(c)], gamma, H);
      if (v > raw_v) {
        raw_v = v;
        best_raw = c;
      }
      std::vector<double> s = all[static_cast<std::size_t>(c)];
      for (double& x : s) x *= scale;
      const double sv = truncated_q_single_sum(s, gamma, H);
      if (sv > scaled_v) {
        scaled_v = sv;
        best_scaled = c;
      }
    }
    CHECK(best_raw == best_scaled);
  }
}

TEST_CASE("transform_remainder") {
  CandidatePlan plan;
  plan.dt = 0.1;
  plan.id = 3;
  for (int i = 1; i <= 10; ++i) plan.waypoints.push_back({0.5 * i, 0.0});
  const Pose2 origin{{0.0, 0.0}, 0.0};

  SUBCASE("identity when nothing executed and the pose is unchanged") {
    const auto rem = transform_remainder(plan, origin, 0, origin);
    REQUIRE(rem.has_value());
    REQUIRE(rem->waypoints.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(rem->waypoints[i].x == doctest::Approx(plan.waypoints[i].x).epsilon(1e-12));
    }
  }
  SUBCASE("ego advanced to waypoint k: remainder starts near the local origin") {
    const Pose2 moved{{0.5 * 3, 0.0}, 0.0};  // exactly at waypoint index 2 (k=3)
    const auto rem = transform_remainder(plan, origin, 3, moved);
    REQUIRE(rem.has_value());
    REQUIRE(rem->waypoints.size() == 7);
    // SE(2) oracle: first remaining waypoint is plan[3] = (2.0, 0) in world,
    // i.e. (0.5, 0) in the frame at (1.5, 0).
    CHECK(rem->waypoints[0].x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rem->waypoints[0].y == doctest::Approx(0.0));
  }
  SUBCASE("pure rotation rotates the remainder into the new frame") {
    const Pose2 rotated{{0.0, 0.0}, kPi / 2.0};
    const auto rem = transform_remainder(plan, origin, 0, rotated);
    REQUIRE(rem.has_value());
    CHECK(rem->waypoints[0].x == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(rem->waypoints[0].y == doctest::Approx(-0.5).epsilon(1e-9));
  }
  SUBCASE("k >= plan length yields no remainder") {
    CHECK_FALSE(transform_remainder(plan, origin, 10, origin).has_value());
    CHECK_FALSE(transform_remainder(plan, origin, 12, origin).has_value());
  }
}

TEST_CASE("adaptive_replan retains on exact ties and under frozen worlds") {
  // Frozen world: nothing moves, the ego holds its pose, and the policy
  // offers the same (stationary) candidates every cycle.
  RolloutFixture fx;
  fx.world.ego.speed = 0.0;
  fx.world.history.clear();
  for (int i = 0; i < 20; ++i) {
    HistorySample h;
    h.pose.position = {0.0, 0.0};
    fx.world.history.push(h);
  }
  RolloutConfig cfg;
  cfg.k = 1;
  cfg.H = 120;
  cfg.gamma = 0.99;

  const int cycles = 100;
  std::vector<CandidatePlan> candidates{fx.straight_plan(120, 0.0, 0),
                                        fx.straight_plan(120, 0.0, 1)};

  // Cycle 1: fresh selection.
  const auto snaps = propagate_world(fx.world, cfg.H, 0.1, cfg.propagation);
  ReplanDecision decision = adaptive_replan(fx.world, std::nullopt, candidates, snaps, cfg);
  CHECK_FALSE(decision.retained);
  CandidatePlan active = decision.chosen;

  int switches = 0;
  for (int cycle = 2; cycle <= cycles; ++cycle) {
    // Frozen world: the ego does not move, candidates are identical.
    const auto rem = transform_remainder(active, fx.world.ego.pose, cfg.k, fx.world.ego.pose);
    REQUIRE(rem.has_value());
    decision = adaptive_replan(fx.world, rem, candidates, snaps, cfg);
    if (!decision.retained) ++switches;
    active = decision.chosen;
  }
  CHECK(switches == 0);
}

TEST_CASE("adaptive_replan abandons a plan that turned bad") {
  RolloutFixture fx;
  RolloutConfig cfg;
  cfg.k = 5;
  cfg.H = 40;

  // Previous plan swerves off-road from here on; new candidates are clean.
  CandidatePlan bad = fx.straight_plan(40, 5.0, 0);
  for (auto& wp : bad.waypoints) wp.y = 30.0;
  const auto rem = transform_remainder(bad, fx.world.ego.pose, 5, fx.world.ego.pose);
  REQUIRE(rem.has_value());

  const std::vector<CandidatePlan> candidates{fx.straight_plan(40, 5.0, 0)};
  const auto snaps = propagate_world(fx.world, cfg.H, 0.1, cfg.propagation);
  const ReplanDecision decision = adaptive_replan(fx.world, rem, candidates, snaps, cfg);
  CHECK_FALSE(decision.retained);
  CHECK(decision.candidate_index == 0);
}
