#include "bridgesim/policy.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "bridgesim/errors.hpp"
#include "bridgesim/rng.hpp"

namespace bridgesim {

namespace {

std::vector<Vec2> expert_waypoints_in_ego_frame(const Observation& obs) {
  const Pose2& ego = obs.world->ego.pose;
  std::vector<Vec2> out;
  out.reserve(obs.expert_future.size());
  for (const Pose2& p : obs.expert_future) out.push_back(to_frame(ego, p.position));
  return out;
}

class ExpertReplayPolicy final : public Policy {
 public:
  std::string name() const override { return "expert"; }
  PolicyOutput propose(const Observation& obs) override {
    CandidatePlan plan;
    plan.dt = obs.plan_dt;
    plan.id = 0;
    plan.waypoints = expert_waypoints_in_ego_frame(obs);
    plan.policy_score = 1.0;
    return {{std::move(plan)}, 0};
  }
};

class ConstantVelocityPolicy final : public Policy {
 public:
  std::string name() const override { return "constant-velocity"; }
  PolicyOutput propose(const Observation& obs) override {
    CandidatePlan plan;
    plan.dt = obs.plan_dt;
    plan.id = 0;
    plan.policy_score = 1.0;
    const double v = obs.world->ego.speed;
    plan.waypoints.reserve(static_cast<std::size_t>(obs.horizon));
    for (int i = 1; i <= obs.horizon; ++i) {
      plan.waypoints.push_back({v * obs.plan_dt * i, 0.0});
    }
    return {{std::move(plan)}, 0};
  }
};

class NoisyExpertPolicy final : public Policy {
 public:
  explicit NoisyExpertPolicy(const NoisyExpertParams& params)
      : params_(params), rng_(0) {
    if (params_.sigma < 0.0 || params_.n < 1) {
      throw ValidationError("noisy-expert: sigma must be >= 0 and n >= 1");
    }
  }

  std::string name() const override { return "noisy-expert"; }
  void reset(std::uint64_t seed) override { rng_ = CounterRng(seed); }

  PolicyOutput propose(const Observation& obs) override {
    const std::vector<Vec2> expert = expert_waypoints_in_ego_frame(obs);
    const std::size_t H = expert.size();

    PolicyOutput out;
    out.candidates.reserve(static_cast<std::size_t>(params_.n));
    for (int j = 0; j < params_.n; ++j) {
      CandidatePlan plan;
      plan.dt = obs.plan_dt;
      plan.id = j;
      if (j == 0 && params_.include_expert) {
        plan.waypoints = expert;
      } else {
        plan.waypoints = perturbed(expert, obs.plan_dt);
      }
      out.candidates.push_back(std::move(plan));
    }
    out.native_best = rng_.uniform_int(params_.n);
    out.candidates[static_cast<std::size_t>(out.native_best)].policy_score = 1.0;
    (void)H;
    return out;
  }

 private:
  std::vector<Vec2> perturbed(const std::vector<Vec2>& expert, double dt) {
    const std::size_t H = expert.size();
    const double amplitude =
        (rng_.bernoulli(0.5) ? 1.0 : -1.0) * rng_.uniform(0.0, 1.5 * params_.sigma);
    const double drift_scale = params_.drift > 0.0 ? rng_.uniform(0.25, 1.0) * params_.drift : 0.0;
    if (H < 2) return expert;

    // Longitudinal drift: re-sample the expert path at stretched arclengths.
    std::vector<Vec2> base;
    if (drift_scale > 0.0) {
      const Polyline path(expert);
      const double total = path.length();
      base.reserve(H);
      std::vector<double> cum(H, 0.0);
      for (std::size_t i = 1; i < H; ++i) cum[i] = cum[i - 1] + distance(expert[i - 1], expert[i]);
      const double end_heading = path.size() >= 2 ? path.segment_heading(path.size() - 2) : 0.0;
      const Vec2 end_dir{std::cos(end_heading), std::sin(end_heading)};
      for (std::size_t i = 0; i < H; ++i) {
        const double t = static_cast<double>(i + 1) * dt;
        const double s = cum[i] + 0.5 * drift_scale * t * t;
        if (s <= total) {
          base.push_back(path.point_at(s));
        } else {
          base.push_back(path.points().back() + end_dir * (s - total));
        }
      }
    } else {
      base = expert;
    }

    // Smooth lateral half-sine, zero at both ends.
    std::vector<Vec2> out(H);
    for (std::size_t i = 0; i < H; ++i) {
      Vec2 dir;
      if (i + 1 < H) {
        dir = (base[i + 1] - base[i]).normalized();
      } else {
        dir = (base[i] - base[i - 1]).normalized();
      }
      if (dir.norm_sq() < 0.5) dir = {1.0, 0.0};  // stationary expert: ego x-axis
      const Vec2 left = dir.perp();
      const double phase = kPi * static_cast<double>(i + 1) / static_cast<double>(H);
      out[i] = base[i] + left * (amplitude * std::sin(phase));
    }
    return out;
  }

  NoisyExpertParams params_;
  CounterRng rng_;
};

class LatticePolicy final : public Policy {
 public:
  LatticePolicy(std::vector<double> speeds, std::vector<double> curvatures)
      : speeds_(std::move(speeds)), curvatures_(std::move(curvatures)), rng_(0) {
    if (speeds_.empty() || curvatures_.empty()) {
      throw ValidationError("lattice: speed and curvature grids must be non-empty");
    }
  }

  std::string name() const override { return "lattice"; }
  void reset(std::uint64_t seed) override { rng_ = CounterRng(seed); }

  PolicyOutput propose(const Observation& obs) override {
    PolicyOutput out;
    int id = 0;
    for (const double v : speeds_) {
      for (const double kappa : curvatures_) {
        CandidatePlan plan;
        plan.dt = obs.plan_dt;
        plan.id = id++;
        plan.waypoints.reserve(static_cast<std::size_t>(obs.horizon));
        for (int i = 1; i <= obs.horizon; ++i) {
          const double s = v * obs.plan_dt * i;
          if (std::abs(kappa) < 1e-12) {
            plan.waypoints.push_back({s, 0.0});
          } else {
            const double theta = s * kappa;
            plan.waypoints.push_back({std::sin(theta) / kappa, (1.0 - std::cos(theta)) / kappa});
          }
        }
        out.candidates.push_back(std::move(plan));
      }
    }
    out.native_best = rng_.uniform_int(static_cast<int>(out.candidates.size()));
    out.candidates[static_cast<std::size_t>(out.native_best)].policy_score = 1.0;
    return out;
  }

 private:
  std::vector<double> speeds_;
  std::vector<double> curvatures_;
  CounterRng rng_;
};

}  // namespace

std::unique_ptr<Policy> make_expert_replay_policy() { return std::make_unique<ExpertReplayPolicy>(); }

std::unique_ptr<Policy> make_constant_velocity_policy() {
  return std::make_unique<ConstantVelocityPolicy>();
}

std::unique_ptr<Policy> make_noisy_expert_policy(const NoisyExpertParams& params) {
  return std::make_unique<NoisyExpertPolicy>(params);
}

std::unique_ptr<Policy> make_lattice_policy(std::vector<double> speeds,
                                            std::vector<double> curvatures) {
  return std::make_unique<LatticePolicy>(std::move(speeds), std::move(curvatures));
}

std::unique_ptr<Policy> make_policy(const PolicyConfig& config) {
  if (config.name == "expert") return make_expert_replay_policy();
  if (config.name == "constant-velocity") return make_constant_velocity_policy();
  if (config.name == "noisy-expert") return make_noisy_expert_policy(config.noisy);
  if (config.name == "lattice") return make_lattice_policy(config.speeds, config.curvatures);
  throw ValidationError("unknown policy: " + config.name);
}

std::string policy_config_to_json(const PolicyConfig& config) {
  nlohmann::json j;
  j["name"] = config.name;
  j["sigma"] = config.noisy.sigma;
  j["n"] = config.noisy.n;
  j["drift"] = config.noisy.drift;
  j["include_expert"] = config.noisy.include_expert;
  j["speeds"] = config.speeds;
  j["curvatures"] = config.curvatures;
  return j.dump();
}

PolicyConfig policy_config_from_json(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed policy config: ") + e.what());
  }
  PolicyConfig cfg;
  try {
    cfg.name = j.value("name", cfg.name);
    cfg.noisy.sigma = j.value("sigma", cfg.noisy.sigma);
    cfg.noisy.n = j.value("n", cfg.noisy.n);
    cfg.noisy.drift = j.value("drift", cfg.noisy.drift);
    cfg.noisy.include_expert = j.value("include_expert", cfg.noisy.include_expert);
    if (j.contains("speeds")) cfg.speeds = j.at("speeds").get<std::vector<double>>();
    if (j.contains("curvatures")) cfg.curvatures = j.at("curvatures").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("policy config missing or mistyped field: ") + e.what());
  }
  return cfg;
}

}  // namespace bridgesim
