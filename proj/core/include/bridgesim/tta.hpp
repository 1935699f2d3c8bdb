#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bridgesim/metrics.hpp"
#include "bridgesim/world.hpp"

namespace bridgesim {

/// One policy-proposed trajectory: H waypoints in the ego frame at the plan
/// origin, one per plan dt starting one dt after the origin.
struct CandidatePlan {
  std::vector<Vec2> waypoints;
  double dt = 0.1;
  std::optional<double> policy_score;  // the policy's own preference
  int id = 0;
};

enum class Propagation { ConstantVelocity, ConstantAcceleration };

std::string to_string(Propagation p);
Propagation propagation_from_string(const std::string& s);

struct RolloutConfig {
  int k = 5;                // execution-prefix steps
  int H = 40;               // planning-horizon steps
  double gamma = 0.99;      // discount
  ScorerWeights weights;
  Propagation propagation = Propagation::ConstantVelocity;
};

/// Predicted world at one future step: agent states plus the absolute
/// scenario step the snapshot stands for (signals are looked up by step).
struct WorldSnapshot {
  int step = 0;
  std::vector<AgentState> agents;
};

/// Kinematic forward simulation of all agents for `steps` steps of `dt`.
/// ConstantVelocity holds each agent's velocity; ConstantAcceleration decays
/// the current acceleration linearly to zero over 1 s and integrates the
/// piecewise dynamics exactly. Deterministic.
std::vector<WorldSnapshot> propagate_world(const WorldState& world, int steps, double dt,
                                           Propagation mode);

/// Snapshots taken from the scenario log instead of a kinematic model; used
/// by the ground-truth (oracle) scorer and open-loop evaluation.
std::vector<WorldSnapshot> replay_snapshots(const WorldState& world, int steps);

// ---------------------------------------------------------------------------
// Plan evaluation
// ---------------------------------------------------------------------------

/// Per-step gated rewards of a plan rolled against world snapshots. Rewards
/// are closed-loop frame scores; once a critical constraint fails at step j,
/// steps >= j contribute zero.
struct PlanEvaluation {
  std::vector<double> rewards;
  std::vector<FrameScore> frames;  // per evaluated step, up to the violation
  int first_violation = -1;        // -1 = clean
};

PlanEvaluation evaluate_plan(const WorldState& world, const CandidatePlan& plan,
                             const Pose2& plan_origin, std::span<const WorldSnapshot> snapshots,
                             int horizon, const RolloutConfig& cfg);

/// Discounted sum of the first `count` rewards.
double discounted_sum(std::span<const double> rewards, double gamma, int count);

/// R_k: discounted gated reward over the first k steps of the plan.
double prefix_reward(const WorldState& world, const CandidatePlan& plan, int k,
                     const RolloutConfig& cfg);

/// Truncated action-value: the H-horizon discounted rollout reward. With
/// deterministic propagation the three-term truncation collapses to this
/// single sum; truncated_q_three_term evaluates the explicit form.
double truncated_q(const WorldState& world, const CandidatePlan& plan, const RolloutConfig& cfg);

/// Explicit three-term evaluation R_k + gamma^k V_k - gamma^H V_H, with both
/// value terms estimated from the same reward sequence continued through its
/// full length. Algebraically equal to the single H-horizon sum.
double truncated_q_three_term(std::span<const double> rewards, double gamma, int k, int H);

/// Single-sum counterpart operating on the same reward sequence.
double truncated_q_single_sum(std::span<const double> rewards, double gamma, int H);

// ---------------------------------------------------------------------------
// Candidate selection
// ---------------------------------------------------------------------------

struct SelectionResult {
  int index = 0;
  double value = 0.0;
  bool retained_previous = false;
};

/// Argmax of truncated_q over candidates; exact ties resolve to the lowest
/// candidate id. Snapshots are shared across candidates.
SelectionResult select_candidate(const WorldState& world,
                                 std::span<const CandidatePlan> candidates,
                                 std::span<const WorldSnapshot> snapshots,
                                 const RolloutConfig& cfg);

/// Drops the k executed waypoints of the previous plan and maps the remainder
/// into the ego frame at new_ego_pose. nullopt when nothing remains.
std::optional<CandidatePlan> transform_remainder(const CandidatePlan& prev_plan,
                                                 const Pose2& prev_origin, int executed_steps,
                                                 const Pose2& new_ego_pose);

struct ReplanDecision {
  CandidatePlan chosen;
  bool retained = false;
  int candidate_index = -1;  // -1 when the persistent plan was retained
};

/// Adaptive replan: retain the persistent remainder when its truncated
/// Q-value over the shared (H-k)-step horizon is >= the best new candidate
/// prefix (ties keep the persistent plan); otherwise select the argmax
/// candidate over the full horizon.
ReplanDecision adaptive_replan(const WorldState& world,
                               const std::optional<CandidatePlan>& remainder,
                               std::span<const CandidatePlan> candidates,
                               std::span<const WorldSnapshot> snapshots,
                               const RolloutConfig& cfg);

}  // namespace bridgesim
