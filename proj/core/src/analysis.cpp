#include "bridgesim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bridgesim/errors.hpp"

namespace bridgesim {

using json = nlohmann::json;

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson: size mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw ValidationError("pearson: needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw ValidationError("pearson: zero variance");
  return sxy / std::sqrt(sxx * syy);
}

PairedTestResult one_sided_paired_test(std::span<const double> diffs) {
  PairedTestResult r;
  const std::size_t n = diffs.size();
  if (n < 2) return r;
  double mean = 0.0;
  for (const double d : diffs) mean += d;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const double d : diffs) var += (d - mean) * (d - mean);
  var /= static_cast<double>(n - 1);
  r.mean = mean;
  const double se = std::sqrt(var / static_cast<double>(n));
  r.t_stat = se > 0.0 ? mean / se : (mean > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  r.significant = r.t_stat > 1.6449;  // one-sided z at 0.95; adequate for n >= 30
  return r;
}

// ---------------------------------------------------------------------------
// Spec (de)serialization
// ---------------------------------------------------------------------------

std::string ExperimentSpec::to_json() const {
  json j;
  json jl = json::array();
  for (const ProcGenConfig& cfg : layouts) jl.push_back(json::parse(procgen_config_to_json(cfg)));
  j["layouts"] = std::move(jl);
  j["suite_size"] = suite_size;
  j["suite_seed"] = suite_seed;
  j["horizons"] = horizons;
  j["k_values"] = k_values;
  j["n_values"] = n_values;
  j["seeds"] = seeds;
  j["base_policy"] = json::parse(policy_config_to_json(base_policy));
  json jf = json::array();
  for (const PolicyConfig& cfg : family) jf.push_back(json::parse(policy_config_to_json(cfg)));
  j["family"] = std::move(jf);
  j["scorers"] = scorers;
  j["engine"] = json::parse(engine.to_json());
  j["experiments"] = experiments;
  return j.dump();
}

ExperimentSpec ExperimentSpec::from_json(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed experiment spec: ") + e.what());
  }
  ExperimentSpec spec;
  try {
    if (j.contains("layouts")) {
      spec.layouts.clear();
      for (const json& jl : j.at("layouts")) {
        spec.layouts.push_back(procgen_config_from_json(jl.dump()));
      }
    }
    spec.suite_size = j.value("suite_size", spec.suite_size);
    spec.suite_seed = j.value("suite_seed", spec.suite_seed);
    if (j.contains("horizons")) spec.horizons = j.at("horizons").get<std::vector<int>>();
    if (j.contains("k_values")) spec.k_values = j.at("k_values").get<std::vector<int>>();
    if (j.contains("n_values")) spec.n_values = j.at("n_values").get<std::vector<int>>();
    if (j.contains("seeds")) spec.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("base_policy")) {
      spec.base_policy = policy_config_from_json(j.at("base_policy").dump());
    }
    if (j.contains("family")) {
      spec.family.clear();
      for (const json& jf : j.at("family")) {
        spec.family.push_back(policy_config_from_json(jf.dump()));
      }
    }
    if (j.contains("scorers")) spec.scorers = j.at("scorers").get<std::vector<std::string>>();
    if (j.contains("engine")) spec.engine = EngineConfig::from_json(j.at("engine").dump());
    if (j.contains("experiments")) {
      spec.experiments = j.at("experiments").get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("experiment spec missing or mistyped field: ") + e.what());
  }
  if (spec.layouts.empty()) spec.layouts.push_back(ProcGenConfig{});
  return spec;
}

std::vector<ScenarioDescription> build_suite(const ExperimentSpec& spec) {
  if (spec.layouts.empty()) throw ValidationError("experiment spec has no layouts");
  std::vector<ScenarioDescription> suite;
  suite.reserve(static_cast<std::size_t>(spec.suite_size));
  for (int i = 0; i < spec.suite_size; ++i) {
    const ProcGenConfig& cfg = spec.layouts[static_cast<std::size_t>(i) % spec.layouts.size()];
    suite.push_back(generate_scenario(cfg, spec.suite_seed + static_cast<std::uint64_t>(i)));
  }
  return suite;
}

// ---------------------------------------------------------------------------
// Experiment runs
// ---------------------------------------------------------------------------

namespace {

struct ArmStats {
  double sum = 0.0;
  int count = 0;
  double mean() const { return count > 0 ? sum / count : 0.0; }
};

std::vector<double> run_arm(const std::vector<ScenarioDescription>& suite,
                            const PolicyConfig& policy, const EngineConfig& cfg,
                            const std::vector<std::uint64_t>& seeds, const std::string& arm_label,
                            const std::string& experiment, double param,
                            std::vector<LongRecord>* long_records) {
  std::vector<double> episode_ds;
  episode_ds.reserve(suite.size() * seeds.size());
  for (const std::uint64_t seed : seeds) {
    EngineConfig run_cfg = cfg;
    run_cfg.seed = seed;
    const auto reports =
        run_suite(suite, [&policy]() { return make_policy(policy); }, run_cfg);
    for (const EpisodeReport& r : reports) {
      if (!r.error.empty()) {
        throw SimulationError("episode '" + r.scenario_id + "' failed: " + r.error);
      }
      episode_ds.push_back(r.ds);
      if (long_records != nullptr) {
        long_records->push_back({experiment, arm_label, param, seed, r.scenario_id, r.ds});
      }
    }
  }
  return episode_ds;
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<HorizonSweepRow> horizon_sweep(const ExperimentSpec& spec,
                                           std::vector<LongRecord>* long_records) {
  const auto suite = build_suite(spec);
  std::vector<HorizonSweepRow> rows;
  for (const int k : spec.k_values) {
    for (const ScorerKind scorer : {ScorerKind::NativeBest, ScorerKind::OracleEpdms}) {
      EngineConfig cfg = spec.engine;
      cfg.mode = SimMode::ClosedLoop;
      cfg.replan_rate = k;
      cfg.rollout.k = k;
      cfg.scorer = scorer;
      const auto ds = run_arm(suite, spec.base_policy, cfg, spec.seeds, to_string(scorer),
                              "fig3a", static_cast<double>(k), long_records);
      rows.push_back({k, to_string(scorer), mean_of(ds)});
    }
  }
  return rows;
}

ObjectiveGapResult objective_gap(const ExperimentSpec& spec,
                                 std::vector<LongRecord>* long_records) {
  const auto suite = build_suite(spec);
  ObjectiveGapResult result;
  for (const int T : spec.horizons) {
    EngineConfig cfg = spec.engine;
    cfg.mode = SimMode::ClosedLoop;
    cfg.horizon_steps = T;

    EngineConfig native_cfg = cfg;
    native_cfg.scorer = ScorerKind::NativeBest;
    const auto native = run_arm(suite, spec.base_policy, native_cfg, spec.seeds, "native",
                                "fig3b", static_cast<double>(T), long_records);

    EngineConfig oracle_cfg = cfg;
    oracle_cfg.scorer = ScorerKind::OracleEpdms;
    const auto oracle = run_arm(suite, spec.base_policy, oracle_cfg, spec.seeds, "oracle",
                                "fig3b", static_cast<double>(T), long_records);

    ObjectiveGapRow row;
    row.T = T;
    row.ds_native = mean_of(native);
    row.ds_oracle = mean_of(oracle);
    row.gap = row.ds_oracle - row.ds_native;
    result.rows.push_back(row);

    std::vector<double> paired(native.size());
    for (std::size_t i = 0; i < native.size(); ++i) paired[i] = oracle[i] - native[i];
    result.paired_gaps.emplace_back(T, std::move(paired));
  }
  return result;
}

CorrelationResult correlation_decay(const ExperimentSpec& spec,
                                    std::vector<LongRecord>* long_records) {
  if (spec.family.size() < 2) {
    throw ValidationError("correlation_decay: needs a policy family of >= 2 members");
  }
  const auto suite = build_suite(spec);
  CorrelationResult result;

  for (std::size_t m = 0; m < spec.family.size(); ++m) {
    std::ostringstream label;
    label << spec.family[m].name << "(sigma=" << spec.family[m].noisy.sigma
          << ",drift=" << spec.family[m].noisy.drift << ")";
    result.member_labels.push_back(label.str());
  }

  // Open-loop arm at T=40.
  for (std::size_t m = 0; m < spec.family.size(); ++m) {
    EngineConfig cfg = spec.engine;
    cfg.mode = SimMode::OpenLoop;
    cfg.horizon_steps = 40;
    const auto ds = run_arm(suite, spec.family[m], cfg, spec.seeds, result.member_labels[m],
                            "fig3c-ol", 40.0, long_records);
    result.ol_scores.push_back(mean_of(ds));
  }

  // Closed-loop arm per horizon.
  for (const int T : spec.horizons) {
    std::vector<double> cl;
    for (std::size_t m = 0; m < spec.family.size(); ++m) {
      EngineConfig cfg = spec.engine;
      cfg.mode = SimMode::ClosedLoop;
      cfg.scorer = ScorerKind::NativeBest;
      cfg.horizon_steps = T;
      const auto ds = run_arm(suite, spec.family[m], cfg, spec.seeds, result.member_labels[m],
                              "fig3c-cl", static_cast<double>(T), long_records);
      cl.push_back(mean_of(ds));
    }
    result.rows.push_back({T, pearson(result.ol_scores, cl)});
    result.cl_scores.push_back(std::move(cl));
  }
  return result;
}

std::vector<ScalingRow> scaling_experiment(const ExperimentSpec& spec,
                                           std::vector<LongRecord>* long_records) {
  const auto suite = build_suite(spec);
  std::vector<ScalingRow> rows;
  for (const int N : spec.n_values) {
    PolicyConfig policy = spec.base_policy;
    if (policy.name == "noisy-expert") {
      policy.noisy.n = N;
    } else if (policy.name == "lattice") {
      // Resample the curvature grid to N points over the configured range.
      const auto [lo, hi] =
          std::minmax_element(policy.curvatures.begin(), policy.curvatures.end());
      std::vector<double> grid;
      for (int i = 0; i < N; ++i) {
        grid.push_back(N == 1 ? *lo : *lo + (*hi - *lo) * static_cast<double>(i) / (N - 1));
      }
      policy.curvatures = grid;
      policy.speeds = {policy.speeds.front()};
    } else {
      throw ValidationError("scaling_experiment: policy must support variable N");
    }

    for (const std::string& scorer_name : spec.scorers) {
      EngineConfig cfg = spec.engine;
      cfg.mode = SimMode::ClosedLoop;
      cfg.scorer = scorer_from_string(scorer_name);
      const auto ds = run_arm(suite, policy, cfg, spec.seeds, scorer_name, "fig4c",
                              static_cast<double>(N), long_records);
      rows.push_back({N, scorer_name, mean_of(ds)});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Aggregation and CSV
// ---------------------------------------------------------------------------

SummaryRecord aggregate(std::span<const EpisodeReport> reports) {
  if (reports.empty()) throw ValidationError("aggregate: needs at least one report");
  SummaryRecord s;
  int counted = 0;
  for (const EpisodeReport& r : reports) {
    ++s.episodes;
    if (!r.error.empty()) {
      ++s.failures;
      continue;
    }
    ++counted;
    s.ds += r.ds;
    s.epdms += r.epdms_mean;
    s.rc += r.rc;
    s.nc += 100.0 * r.means.nc;
    s.dac += 100.0 * r.means.dac;
    s.ddc += 100.0 * r.means.ddc;
    s.tlc += 100.0 * r.means.tlc;
    s.ttc += 100.0 * r.means.ttc;
    s.lk += 100.0 * r.means.lk;
    s.hc += 100.0 * r.means.hc;
    s.ec += 100.0 * r.means.ec;
  }
  if (counted > 0) {
    const double n = counted;
    s.ds /= n;
    s.epdms /= n;
    s.rc /= n;
    s.nc /= n;
    s.dac /= n;
    s.ddc /= n;
    s.tlc /= n;
    s.ttc /= n;
    s.lk /= n;
    s.hc /= n;
    s.ec /= n;
  }
  return s;
}

namespace {

std::string fmt(double v) {
  json j = v;
  return j.dump();
}

}  // namespace

std::string summary_csv(const SummaryRecord& s) {
  std::ostringstream os;
  os << "episodes,failures,ds,epdms,rc,nc,dac,ddc,tlc,ttc,lk,hc,ec\n";
  os << s.episodes << "," << s.failures << "," << fmt(s.ds) << "," << fmt(s.epdms) << ","
     << fmt(s.rc) << "," << fmt(s.nc) << "," << fmt(s.dac) << "," << fmt(s.ddc) << ","
     << fmt(s.tlc) << "," << fmt(s.ttc) << "," << fmt(s.lk) << "," << fmt(s.hc) << ","
     << fmt(s.ec) << "\n";
  return os.str();
}

std::string horizon_sweep_csv(std::span<const HorizonSweepRow> rows) {
  std::ostringstream os;
  os << "k,scorer,mean_ds\n";
  for (const auto& r : rows) os << r.k << "," << r.scorer << "," << fmt(r.mean_ds) << "\n";
  return os.str();
}

std::string objective_gap_csv(std::span<const ObjectiveGapRow> rows) {
  std::ostringstream os;
  os << "T,ds_native,ds_oracle,gap\n";
  for (const auto& r : rows) {
    os << r.T << "," << fmt(r.ds_native) << "," << fmt(r.ds_oracle) << "," << fmt(r.gap) << "\n";
  }
  return os.str();
}

std::string correlation_csv(std::span<const CorrelationRow> rows) {
  std::ostringstream os;
  os << "T,r\n";
  for (const auto& r : rows) os << r.T << "," << fmt(r.r) << "\n";
  return os.str();
}

std::string scaling_csv(std::span<const ScalingRow> rows) {
  std::ostringstream os;
  os << "N,scorer,mean_ds\n";
  for (const auto& r : rows) os << r.N << "," << r.scorer << "," << fmt(r.mean_ds) << "\n";
  return os.str();
}

std::string long_records_csv(std::span<const LongRecord> records) {
  std::ostringstream os;
  os << "experiment,arm,param,seed,scenario_id,ds\n";
  for (const auto& r : records) {
    os << r.experiment << "," << r.arm << "," << fmt(r.param) << "," << r.seed << ","
       << r.scenario_id << "," << fmt(r.ds) << "\n";
  }
  return os.str();
}

}  // namespace bridgesim
