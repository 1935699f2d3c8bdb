#include <doctest.h>

#include <cmath>

#include "bridgesim/policy.hpp"

using namespace bridgesim;

namespace {

struct ObsFixture {
  ScenarioDescription scenario;
  MapIndex map;
  WorldState world;
  Polyline route;
  Observation obs;

  ObsFixture() {
    scenario.id = "obs";
    scenario.step_count = 100;
    scenario.ego_track_id = "ego";
    MapFeature lane;
    lane.id = "lane_0";
    lane.kind = FeatureKind::LaneCenter;
    for (double x = -20.0; x <= 200.0; x += 2.0) lane.polyline.push_back({x, 0.0});
    scenario.map_features.push_back(lane);
    Track ego;
    ego.object_id = "ego";
    ego.object_type = ObjectType::Ego;
    ego.dims = {4.6, 1.9, 1.6};
    TrackState st;
    st.valid = true;
    st.velocity = {5.0, 0.0};
    ego.states.assign(100, st);
    scenario.tracks.push_back(ego);

    map = MapIndex(scenario);
    world.scenario = &scenario;
    world.map = &map;
    world.ego.speed = 5.0;
    world.ego_dims = ego.dims;
    route = Polyline({{0, 0}, {200, 0}});

    obs.world = &world;
    obs.route = &route;
    obs.horizon = 20;
    obs.plan_dt = 0.1;
    for (int i = 1; i <= 20; ++i) {
      obs.expert_future.push_back({{0.5 * i, 0.0}, 0.0});
      obs.expert_speeds.push_back(5.0);
    }
  }
};

double max_lateral_deviation(const CandidatePlan& plan, const std::vector<Pose2>& expert) {
  double worst = 0.0;
  for (std::size_t i = 0; i < plan.waypoints.size() && i < expert.size(); ++i) {
    worst = std::max(worst, std::abs(plan.waypoints[i].y - expert[i].position.y));
  }
  return worst;
}

}  // namespace

TEST_CASE("expert_replay returns the logged future in the ego frame") {
  ObsFixture fx;
  auto policy = make_expert_replay_policy();
  const PolicyOutput out = policy->propose(fx.obs);
  REQUIRE(out.candidates.size() == 1);
  CHECK(out.native_best == 0);
  const CandidatePlan& plan = out.candidates[0];
  REQUIRE(plan.waypoints.size() == 20);
  for (int i = 0; i < 20; ++i) {
    CHECK(plan.waypoints[static_cast<std::size_t>(i)].x == doctest::Approx(0.5 * (i + 1)));
    CHECK(plan.waypoints[static_cast<std::size_t>(i)].y == doctest::Approx(0.0));
  }
}

TEST_CASE("expert_replay respects the ego frame under rotation") {
  ObsFixture fx;
  fx.world.ego.pose.heading = kPi / 2.0;
  auto policy = make_expert_replay_policy();
  const PolicyOutput out = policy->propose(fx.obs);
  // World +x maps to ego-frame -y under a 90 degree ego heading.
  CHECK(out.candidates[0].waypoints[0].y == doctest::Approx(-0.5).epsilon(1e-9));
}

TEST_CASE("constant_velocity policy extrapolates along the ego x-axis") {
  ObsFixture fx;
  auto policy = make_constant_velocity_policy();
  const PolicyOutput out = policy->propose(fx.obs);
  const CandidatePlan& plan = out.candidates[0];
  for (int i = 1; i <= 20; ++i) {
    CHECK(plan.waypoints[static_cast<std::size_t>(i - 1)].x ==
          doctest::Approx(5.0 * 0.1 * i).epsilon(1e-12));
    CHECK(plan.waypoints[static_cast<std::size_t>(i - 1)].y == doctest::Approx(0.0));
  }
}

TEST_CASE("noisy_expert determinism and structure") {
  ObsFixture fx;
  NoisyExpertParams params;
  params.sigma = 0.5;
  params.n = 8;

  auto a = make_noisy_expert_policy(params);
  auto b = make_noisy_expert_policy(params);
  a->reset(99);
  b->reset(99);
  const PolicyOutput oa = a->propose(fx.obs);
  const PolicyOutput ob = b->propose(fx.obs);
  REQUIRE(oa.candidates.size() == 8);
  CHECK(oa.native_best == ob.native_best);
  for (std::size_t i = 0; i < 8; ++i) {
    REQUIRE(oa.candidates[i].waypoints.size() == ob.candidates[i].waypoints.size());
    for (std::size_t j = 0; j < oa.candidates[i].waypoints.size(); ++j) {
      CHECK(oa.candidates[i].waypoints[j] == ob.candidates[i].waypoints[j]);
    }
  }
}

TEST_CASE("noisy_expert with sigma 0 reproduces the expert everywhere") {
  ObsFixture fx;
  NoisyExpertParams params;
  params.sigma = 0.0;
  params.n = 5;
  auto policy = make_noisy_expert_policy(params);
  policy->reset(1);
  const PolicyOutput out = policy->propose(fx.obs);
  for (const CandidatePlan& c : out.candidates) {
    CHECK(max_lateral_deviation(c, fx.obs.expert_future) < 1e-9);
  }
}

TEST_CASE("noisy_expert sigma=2 N=8: candidate-set deviation lands in [1,3] m") {
  ObsFixture fx;
  NoisyExpertParams params;
  params.sigma = 2.0;
  params.n = 8;
  auto policy = make_noisy_expert_policy(params);
  policy->reset(4242);
  const PolicyOutput out = policy->propose(fx.obs);
  CHECK(max_lateral_deviation(out.candidates[0], fx.obs.expert_future) < 1e-9);  // expert kept
  double worst = 0.0;
  for (std::size_t i = 1; i < out.candidates.size(); ++i) {
    worst = std::max(worst, max_lateral_deviation(out.candidates[i], fx.obs.expert_future));
  }
  CHECK(worst >= 1.0);
  CHECK(worst <= 3.0);
}

TEST_CASE("noisy_expert drift overshoots the expert arclength progressively") {
  ObsFixture fx;
  NoisyExpertParams params;
  params.sigma = 0.0;
  params.n = 4;
  params.drift = 1.0;
  auto policy = make_noisy_expert_policy(params);
  policy->reset(5);
  const PolicyOutput out = policy->propose(fx.obs);
  for (std::size_t c = 1; c < out.candidates.size(); ++c) {
    const auto& wp = out.candidates[c].waypoints;
    const double expert_end = fx.obs.expert_future.back().position.x;
    CHECK(wp.back().x > expert_end + 0.05);
    // Overshoot grows along the horizon.
    const double early = wp[4].x - fx.obs.expert_future[4].position.x;
    const double late = wp.back().x - expert_end;
    CHECK(late > early);
  }
}

TEST_CASE("noisy_expert include_expert=false perturbs every candidate") {
  ObsFixture fx;
  NoisyExpertParams params;
  params.sigma = 2.0;
  params.n = 6;
  params.include_expert = false;
  auto policy = make_noisy_expert_policy(params);
  policy->reset(77);
  const PolicyOutput out = policy->propose(fx.obs);
  int perturbed = 0;
  for (const CandidatePlan& c : out.candidates) {
    if (max_lateral_deviation(c, fx.obs.expert_future) > 1e-6) ++perturbed;
  }
  CHECK(perturbed >= 5);  // amplitude draws can be near zero, but not often
}

TEST_CASE("lattice policy geometry and cardinality") {
  ObsFixture fx;
  SUBCASE("single straight plan") {
    auto policy = make_lattice_policy({5.0}, {0.0});
    policy->reset(1);
    const PolicyOutput out = policy->propose(fx.obs);
    REQUIRE(out.candidates.size() == 1);
    CHECK(out.candidates[0].waypoints.back().y == doctest::Approx(0.0));
  }
  SUBCASE("endpoint lies on the commanded circle") {
    const double kappa = 0.05;
    auto policy = make_lattice_policy({5.0}, {kappa});
    policy->reset(1);
    const PolicyOutput out = policy->propose(fx.obs);
    const Vec2 end = out.candidates[0].waypoints.back();
    const Vec2 center{0.0, 1.0 / kappa};
    CHECK(distance(end, center) == doctest::Approx(1.0 / kappa).epsilon(1e-9));
  }
  SUBCASE("grid cardinality 4x8") {
    std::vector<double> speeds{2, 4, 6, 8};
    std::vector<double> curvatures;
    for (int i = 0; i < 8; ++i) curvatures.push_back(-0.07 + 0.02 * i);
    auto policy = make_lattice_policy(speeds, curvatures);
    policy->reset(1);
    CHECK(policy->propose(fx.obs).candidates.size() == 32);
  }
}

TEST_CASE("policy factory and config round-trip") {
  PolicyConfig cfg;
  cfg.name = "noisy-expert";
  cfg.noisy.sigma = 1.25;
  cfg.noisy.n = 12;
  cfg.noisy.drift = 0.4;
  cfg.noisy.include_expert = false;
  const PolicyConfig back = policy_config_from_json(policy_config_to_json(cfg));
  CHECK(back.name == cfg.name);
  CHECK(back.noisy.sigma == doctest::Approx(cfg.noisy.sigma));
  CHECK(back.noisy.n == cfg.noisy.n);
  CHECK(back.noisy.drift == doctest::Approx(cfg.noisy.drift));
  CHECK(back.noisy.include_expert == cfg.noisy.include_expert);
  CHECK(make_policy(back)->name() == "noisy-expert");
  CHECK_THROWS(make_policy(PolicyConfig{"nonsense", {}, {}, {}}));
}
