#pragma once

#include <span>
#include <string>
#include <vector>

#include "bridgesim/engine.hpp"
#include "bridgesim/procgen.hpp"

namespace bridgesim {

/// Sample Pearson correlation coefficient. Throws on size mismatch, fewer
/// than two points, or zero variance in either argument.
double pearson(std::span<const double> x, std::span<const double> y);

/// One-sided paired test that mean(diffs) > 0, normal approximation
/// (valid for n >= 30). Returns the t statistic and the 0.95 decision.
struct PairedTestResult {
  double mean = 0.0;
  double t_stat = 0.0;
  bool significant = false;  // one-sided, 0.95 confidence
};
PairedTestResult one_sided_paired_test(std::span<const double> diffs);

/// Desk-scale experiment description consumed by the `analyze` subcommand.
struct ExperimentSpec {
  std::vector<ProcGenConfig> layouts;  // suite built round-robin over these
  int suite_size = 30;
  std::uint64_t suite_seed = 1;
  std::vector<int> horizons{40, 80, 120, 160};
  std::vector<int> k_values{1, 2, 5, 10, 20, 40};
  std::vector<int> n_values{2, 4, 8, 16, 32};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  PolicyConfig base_policy;            // fig3a / fig3b / fig4c
  std::vector<PolicyConfig> family;    // fig3c
  std::vector<std::string> scorers{"truncated-q", "native"};  // fig4c arms
  EngineConfig engine;
  std::vector<std::string> experiments{"fig3a", "fig3b", "fig3c", "fig4c"};

  static ExperimentSpec from_json(std::string_view bytes);
  std::string to_json() const;
};

/// Long-format record shared by every experiment table.
struct LongRecord {
  std::string experiment;
  std::string arm;     // scorer or family-member label
  double param = 0.0;  // T, k, or N
  std::uint64_t seed = 0;
  std::string scenario_id;
  double ds = 0.0;
};

// Fig. 3(a): mean DS per execution prefix k (NativeBest execution) plus the
// ground-truth-selection row at each k.
struct HorizonSweepRow {
  int k = 0;
  std::string scorer;
  double mean_ds = 0.0;
};
std::vector<HorizonSweepRow> horizon_sweep(const ExperimentSpec& spec,
                                           std::vector<LongRecord>* long_records = nullptr);

// Fig. 3(b): native-best vs ground-truth selection per horizon T.
struct ObjectiveGapRow {
  int T = 0;
  double ds_native = 0.0;
  double ds_oracle = 0.0;
  double gap = 0.0;
};
struct ObjectiveGapResult {
  std::vector<ObjectiveGapRow> rows;
  // Paired per-episode gaps keyed by horizon, for significance testing.
  std::vector<std::pair<int, std::vector<double>>> paired_gaps;
};
ObjectiveGapResult objective_gap(const ExperimentSpec& spec,
                                 std::vector<LongRecord>* long_records = nullptr);

// Fig. 3(c): Pearson correlation between the open-loop score at T=40 and the
// closed-loop driving score at each horizon, across the policy family.
struct CorrelationRow {
  int T = 0;
  double r = 0.0;
};
struct CorrelationResult {
  std::vector<CorrelationRow> rows;
  std::vector<std::string> member_labels;
  std::vector<double> ol_scores;               // per member, T=40
  std::vector<std::vector<double>> cl_scores;  // [horizon][member]
};
CorrelationResult correlation_decay(const ExperimentSpec& spec,
                                    std::vector<LongRecord>* long_records = nullptr);

// Fig. 4(c): mean DS per candidate count N and scorer.
struct ScalingRow {
  int N = 0;
  std::string scorer;
  double mean_ds = 0.0;
};
std::vector<ScalingRow> scaling_experiment(const ExperimentSpec& spec,
                                           std::vector<LongRecord>* long_records = nullptr);

/// Suite summary in the benchmark-table column layout
/// (DS, EPDMS, RC, NC, DAC, DDC, TLC, TTC, LK, HC, EC), means over reports.
struct SummaryRecord {
  int episodes = 0;
  int failures = 0;  // episodes that ended with an error
  double ds = 0.0, epdms = 0.0, rc = 0.0;
  double nc = 0.0, dac = 0.0, ddc = 0.0, tlc = 0.0;
  double ttc = 0.0, lk = 0.0, hc = 0.0, ec = 0.0;
};
SummaryRecord aggregate(std::span<const EpisodeReport> reports);
std::string summary_csv(const SummaryRecord& summary);

std::string horizon_sweep_csv(std::span<const HorizonSweepRow> rows);
std::string objective_gap_csv(std::span<const ObjectiveGapRow> rows);
std::string correlation_csv(std::span<const CorrelationRow> rows);
std::string scaling_csv(std::span<const ScalingRow> rows);
std::string long_records_csv(std::span<const LongRecord> records);

/// Round-robin procgen suite over spec.layouts.
std::vector<ScenarioDescription> build_suite(const ExperimentSpec& spec);

}  // namespace bridgesim
