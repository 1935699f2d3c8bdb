#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bridgesim/tta.hpp"
#include "bridgesim/world.hpp"

namespace bridgesim {

/// Ground-truth observation handed to a policy at every replan tick. The
/// synthetic built-in policies are oracle stand-ins, so the logged ego future
/// (constant-velocity extrapolated past the log end) is part of the contract.
struct Observation {
  const WorldState* world = nullptr;
  const Polyline* route = nullptr;          // expert route centerline
  std::vector<Pose2> expert_future;         // next `horizon` logged ego poses, world frame
  std::vector<double> expert_speeds;        // speeds at those samples
  int horizon = 40;
  double plan_dt = 0.1;
};

struct PolicyOutput {
  std::vector<CandidatePlan> candidates;  // N >= 1, shared horizon and dt
  int native_best = 0;                    // the policy's own top choice
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  /// Re-seeds per-episode state; pure functions of (obs, seed) afterwards.
  virtual void reset(std::uint64_t seed) { (void)seed; }
  virtual PolicyOutput propose(const Observation& obs) = 0;
};

/// Single candidate: the logged ego future in the current ego frame.
std::unique_ptr<Policy> make_expert_replay_policy();

/// Single candidate extrapolating the current speed along the ego x-axis.
std::unique_ptr<Policy> make_constant_velocity_policy();

struct NoisyExpertParams {
  double sigma = 0.5;         // lateral perturbation scale, m
  int n = 8;                  // candidate count
  double drift = 0.0;         // longitudinal drift, m/s per s
  bool include_expert = true; // candidate 0 is the exact expert future
};

/// Expert future plus smooth half-sine lateral perturbations with random
/// amplitude up to 1.5 sigma and optional longitudinal drift. native_best is
/// drawn uniformly at random, modeling a biased internal scorer. With
/// include_expert=false every candidate is perturbed (an i.i.d. proposal
/// sampler for scaling studies).
std::unique_ptr<Policy> make_noisy_expert_policy(const NoisyExpertParams& params);

/// |speeds| x |curvatures| constant-curvature constant-speed primitives.
/// native_best is drawn uniformly at random from the seed.
std::unique_ptr<Policy> make_lattice_policy(std::vector<double> speeds,
                                            std::vector<double> curvatures);

/// CLI/analysis-facing policy description.
struct PolicyConfig {
  std::string name = "expert";  // expert | constant-velocity | noisy-expert | lattice
  NoisyExpertParams noisy;
  std::vector<double> speeds{5.0};
  std::vector<double> curvatures{0.0};
};

std::unique_ptr<Policy> make_policy(const PolicyConfig& config);

std::string policy_config_to_json(const PolicyConfig& config);
PolicyConfig policy_config_from_json(std::string_view bytes);

}  // namespace bridgesim
