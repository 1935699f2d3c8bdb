#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bridgesim/policy.hpp"
#include "bridgesim/report.hpp"
#include "bridgesim/scenario.hpp"
#include "bridgesim/traffic.hpp"
#include "bridgesim/tta.hpp"

namespace bridgesim {

enum class SimMode { OpenLoop, ClosedLoop };
enum class ScorerKind { NativeBest, TruncatedQ, TruncatedQAdaptive, OracleEpdms };

std::string to_string(SimMode m);
std::string to_string(ScorerKind s);
SimMode sim_mode_from_string(const std::string& s);
ScorerKind scorer_from_string(const std::string& s);

struct EngineConfig {
  SimMode mode = SimMode::ClosedLoop;
  TrafficMode traffic = TrafficMode::LogReplay;
  double sim_dt = 0.1;
  int replan_rate = 5;    // steps between inferences
  int horizon_steps = 80; // T, evaluated steps after warm-up
  double warmup = 2.0;    // s of log replay filling the history buffer
  ScorerKind scorer = ScorerKind::TruncatedQ;
  RolloutConfig rollout;  // k mirrors replan_rate unless overridden
  ScorerWeights weights;
  std::uint64_t seed = 0;
  bool terminate_on_collision = true;
  bool strict_collision = false;  // disable the at-fault exemptions
  int threads = 0;                // 0 = BRIDGESIM_THREADS env, then hardware
  TrackingParams tracking;
  AdversaryScript adversary;      // used when traffic == Adversarial
  std::string adversary_agent;    // empty = nearest agent ahead at warm-up end

  int warmup_steps() const;
  /// Canonical JSON echo of every field.
  std::string to_json() const;
  static EngineConfig from_json(std::string_view bytes);
};

/// Non-reactive evaluation: the ego follows the log exactly; at every replan
/// tick the policy's chosen trajectory is scored (EPDMS with EP) against the
/// replayed future, and minADE is accumulated over all candidates.
EpisodeReport run_open_loop(const ScenarioDescription& scenario, Policy& policy,
                            const EngineConfig& cfg);

/// Reactive simulation: warm-up replay, replan every replan_rate steps with
/// the configured scorer, controllers consuming the cached plan in between,
/// traffic per cfg.traffic, per-step closed-loop frame scoring, and
/// DS = 100 * rc * mean(epdms).
EpisodeReport run_closed_loop(const ScenarioDescription& scenario, Policy& policy,
                              const EngineConfig& cfg);

/// Dispatch on cfg.mode with the per-episode policy seed derived from
/// (cfg.seed, episode_index).
EpisodeReport run_episode(const ScenarioDescription& scenario, Policy& policy,
                          const EngineConfig& cfg, std::uint64_t episode_index = 0);

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

/// Independent episodes, parallel across worker threads, reports in input
/// order. Per-episode failures are captured in the report's error field.
std::vector<EpisodeReport> run_suite(std::span<const ScenarioDescription> scenarios,
                                     const PolicyFactory& make_policy, const EngineConfig& cfg);

/// Worker count resolution: cfg.threads, else BRIDGESIM_THREADS, else
/// hardware concurrency.
int resolve_thread_count(const EngineConfig& cfg);

}  // namespace bridgesim
