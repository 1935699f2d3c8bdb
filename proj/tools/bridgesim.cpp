// bridgesim command-line front end: scenario generation, simulation,
// score verification, experiment harness, and schema validation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bridgesim/analysis.hpp"
#include "bridgesim/engine.hpp"
#include "bridgesim/errors.hpp"
#include "bridgesim/procgen.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace bridgesim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SimulationError("cannot write file: " + path.string());
  out << bytes;
}

void write_resolved_config(const fs::path& out_dir, json resolved) {
  write_file(out_dir / "resolved_config.json", resolved.dump());
}

std::vector<ScenarioDescription> load_scenario_dir(const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 9 && name.substr(name.size() - 9) == ".scn.json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());  // directory iteration order is not deterministic
  if (files.empty()) throw ValidationError("no *.scn.json files in " + dir);
  std::vector<ScenarioDescription> scenarios;
  scenarios.reserve(files.size());
  for (const fs::path& f : files) scenarios.push_back(load_scenario_file(f.string()));
  return scenarios;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string config_path;
  std::string layout = "straight";
  int lanes = 1;
  double lane_width = 3.5;
  double route_length = 150.0;
  int agents = 0;
  double cruise_speed = 8.0;
  bool signalized = false;
  double duration = 20.0;
  int n = 1;
  std::uint64_t seed = 0;
  std::string out;
};

int run_generate(const GenerateArgs& args, const CLI::App& cmd) {
  ProcGenConfig cfg;
  if (!args.config_path.empty()) {
    cfg = procgen_config_from_json(read_file(args.config_path));
  }
  if (cmd.count("--layout") || args.config_path.empty()) {
    cfg.layout = layout_from_string(args.layout);
  }
  if (cmd.count("--lanes")) cfg.lane_count = args.lanes;
  if (cmd.count("--lane-width")) cfg.lane_width = args.lane_width;
  if (cmd.count("--route-length")) cfg.route_length = args.route_length;
  if (cmd.count("--agents")) cfg.agent_count = args.agents;
  if (cmd.count("--cruise-speed")) cfg.ego_cruise_speed = args.cruise_speed;
  if (cmd.count("--signalized")) cfg.signalized = args.signalized;
  if (cmd.count("--duration")) cfg.duration = args.duration;

  fs::create_directories(args.out);
  const auto scenarios = generate_suite(cfg, args.n, args.seed);

  json manifest;
  json ids = json::array();
  for (const ScenarioDescription& s : scenarios) {
    const std::string filename = s.id + ".scn.json";
    write_file(fs::path(args.out) / filename, serialize_scenario(s));
    ids.push_back(s.id);
  }
  manifest["scenario_ids"] = std::move(ids);
  write_file(fs::path(args.out) / "manifest.json", manifest.dump());

  json resolved;
  resolved["subcommand"] = "generate";
  resolved["procgen"] = json::parse(procgen_config_to_json(cfg));
  resolved["n"] = args.n;
  resolved["seed"] = args.seed;
  write_resolved_config(args.out, std::move(resolved));

  std::cout << "generated " << scenarios.size() << " scenario(s) into " << args.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string scenario_dir;
  std::string scenario_file;
  std::string config_path;
  std::string mode = "closed-loop";
  std::string traffic = "log-replay";
  std::string scorer = "truncated-q";
  std::string policy = "expert";
  double sigma = 0.5;
  int n_candidates = 8;
  double drift = 0.0;
  bool include_expert = true;
  std::vector<double> speeds{5.0};
  std::vector<double> curvatures{0.0};
  int replan_rate = 5;
  int horizon = 80;
  int plan_horizon = 40;
  double gamma = 0.99;
  double warmup = 2.0;
  std::uint64_t seed = 0;
  int threads = 0;
  bool export_frames = false;
  std::string out;
};

int run_simulate(const SimulateArgs& args, const CLI::App& cmd) {
  EngineConfig cfg;
  if (!args.config_path.empty()) cfg = EngineConfig::from_json(read_file(args.config_path));
  if (cmd.count("--mode") || args.config_path.empty()) cfg.mode = sim_mode_from_string(args.mode);
  if (cmd.count("--traffic") || args.config_path.empty()) {
    cfg.traffic = traffic_mode_from_string(args.traffic);
  }
  if (cmd.count("--scorer") || args.config_path.empty()) {
    cfg.scorer = scorer_from_string(args.scorer);
  }
  if (cmd.count("--replan-rate")) {
    cfg.replan_rate = args.replan_rate;
    cfg.rollout.k = args.replan_rate;
  }
  if (cmd.count("--horizon")) cfg.horizon_steps = args.horizon;
  if (cmd.count("--plan-horizon")) cfg.rollout.H = args.plan_horizon;
  if (cmd.count("--gamma")) cfg.rollout.gamma = args.gamma;
  if (cmd.count("--warmup")) cfg.warmup = args.warmup;
  if (cmd.count("--seed")) cfg.seed = args.seed;
  if (cmd.count("--threads")) cfg.threads = args.threads;

  PolicyConfig policy;
  policy.name = args.policy;
  policy.noisy.sigma = args.sigma;
  policy.noisy.n = args.n_candidates;
  policy.noisy.drift = args.drift;
  policy.noisy.include_expert = args.include_expert;
  policy.speeds = args.speeds;
  policy.curvatures = args.curvatures;

  std::vector<ScenarioDescription> scenarios;
  if (!args.scenario_file.empty()) {
    scenarios.push_back(load_scenario_file(args.scenario_file));
  } else if (!args.scenario_dir.empty()) {
    scenarios = load_scenario_dir(args.scenario_dir);
  } else {
    throw ValidationError("simulate: provide --scenario-dir or --scenario");
  }

  fs::create_directories(args.out);
  const auto reports = run_suite(scenarios, [&policy]() { return make_policy(policy); }, cfg);

  for (const EpisodeReport& r : reports) {
    write_file(fs::path(args.out) / (r.scenario_id + ".report.json"), report_to_json(r));
    if (args.export_frames) {
      write_file(fs::path(args.out) / (r.scenario_id + ".frames.csv"), frames_csv(r));
    }
  }
  write_file(fs::path(args.out) / "suite.csv", suite_csv(reports));
  const SummaryRecord summary = aggregate(reports);
  write_file(fs::path(args.out) / "summary.csv", summary_csv(summary));

  json resolved;
  resolved["subcommand"] = "simulate";
  resolved["engine"] = json::parse(cfg.to_json());
  resolved["policy"] = json::parse(policy_config_to_json(policy));
  resolved["scenarios"] = json::array();
  for (const ScenarioDescription& s : scenarios) resolved["scenarios"].push_back(s.id);
  write_resolved_config(args.out, std::move(resolved));

  int failures = 0;
  for (const EpisodeReport& r : reports) {
    if (!r.error.empty()) {
      ++failures;
      std::cerr << "episode " << r.scenario_id << " failed: " << r.error << "\n";
    }
  }
  std::cout << "episodes: " << reports.size() << "  mean DS: " << summary.ds
            << "  mean RC: " << summary.rc << "  failures: " << failures << "\n";
  return failures == 0 ? kExitOk : kExitRuntime;
}

// ---------------------------------------------------------------------------
// score / analyze / validate
// ---------------------------------------------------------------------------

int run_score(const std::string& report_path) {
  const EpisodeReport r = load_report_file(report_path);
  if (r.frames.empty()) throw ValidationError("report has no frames to verify");
  double mean = 0.0;
  for (const FrameScore& f : r.frames) mean += f.epdms;
  mean /= static_cast<double>(r.frames.size());

  const double expected_epdms = 100.0 * mean;
  const double expected_ds = r.mode == "closed-loop" ? 100.0 * r.rc * mean : expected_epdms;

  bool ok = true;
  if (std::abs(expected_ds - r.ds) > 1e-9) {
    std::cerr << "ds mismatch: stored " << r.ds << ", recomputed " << expected_ds << "\n";
    ok = false;
  }
  if (std::abs(expected_epdms - r.epdms_mean) > 1e-9) {
    std::cerr << "epdms_mean mismatch: stored " << r.epdms_mean << ", recomputed "
              << expected_epdms << "\n";
    ok = false;
  }
  for (const FrameScore& f : r.frames) {
    if (f.epdms < 0.0 || f.epdms > 1.0 ||
        ((!f.nc || !f.dac || !f.tlc || !f.ddc) && f.epdms != 0.0)) {
      std::cerr << "frame violates the gated score invariant\n";
      ok = false;
      break;
    }
  }
  if (ok) {
    std::cout << "score verified: ds=" << r.ds << " rc=" << r.rc << " frames=" << r.frames.size()
              << "\n";
    return kExitOk;
  }
  return kExitValidation;
}

int run_analyze(const std::string& spec_path, const std::string& out) {
  const ExperimentSpec spec = ExperimentSpec::from_json(read_file(spec_path));
  fs::create_directories(out);

  std::vector<LongRecord> records;
  const auto wants = [&spec](const std::string& name) {
    for (const std::string& e : spec.experiments) {
      if (e == name) return true;
    }
    return false;
  };

  if (wants("fig3a")) {
    const auto rows = horizon_sweep(spec, &records);
    write_file(fs::path(out) / "fig3a.csv", horizon_sweep_csv(rows));
    std::cout << "fig3a: " << rows.size() << " rows\n";
  }
  if (wants("fig3b")) {
    const auto result = objective_gap(spec, &records);
    write_file(fs::path(out) / "fig3b.csv", objective_gap_csv(result.rows));
    std::cout << "fig3b: " << result.rows.size() << " rows\n";
  }
  if (wants("fig3c")) {
    const auto result = correlation_decay(spec, &records);
    write_file(fs::path(out) / "fig3c.csv", correlation_csv(result.rows));
    std::cout << "fig3c: " << result.rows.size() << " rows\n";
  }
  if (wants("fig4c")) {
    const auto rows = scaling_experiment(spec, &records);
    write_file(fs::path(out) / "fig4c.csv", scaling_csv(rows));
    std::cout << "fig4c: " << rows.size() << " rows\n";
  }
  write_file(fs::path(out) / "long.csv", long_records_csv(records));

  json resolved;
  resolved["subcommand"] = "analyze";
  resolved["spec"] = json::parse(spec.to_json());
  write_resolved_config(out, std::move(resolved));
  return kExitOk;
}

int run_validate(const std::string& scenario_path) {
  const ScenarioDescription s = load_scenario_file(scenario_path);
  std::cout << "valid scenario '" << s.id << "': " << s.step_count << " steps, "
            << s.tracks.size() << " tracks, " << s.map_features.size() << " map features\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bridgesim: deterministic closed-loop driving simulation and evaluation"};
  app.require_subcommand(1);

  GenerateArgs gen;
  CLI::App* generate = app.add_subcommand("generate", "Write procedural scenarios");
  generate->add_option("--config", gen.config_path, "procgen config JSON");
  generate->add_option("--layout", gen.layout, "straight | arc | intersection");
  generate->add_option("--lanes", gen.lanes, "lane count");
  generate->add_option("--lane-width", gen.lane_width, "lane width [m]");
  generate->add_option("--route-length", gen.route_length, "route length [m]");
  generate->add_option("--agents", gen.agents, "background agent count");
  generate->add_option("--cruise-speed", gen.cruise_speed, "ego cruise speed [m/s]");
  generate->add_flag("--signalized", gen.signalized, "add stop lines and signals");
  generate->add_option("--duration", gen.duration, "scenario duration [s]");
  generate->add_option("--n", gen.n, "number of scenarios");
  generate->add_option("--seed", gen.seed, "base seed");
  generate->add_option("--out", gen.out, "output directory")->required();

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Run episodes and write reports");
  simulate->add_option("--scenario-dir", sim.scenario_dir, "directory of *.scn.json files");
  simulate->add_option("--scenario", sim.scenario_file, "single scenario file");
  simulate->add_option("--config", sim.config_path, "engine config JSON");
  simulate->add_option("--mode", sim.mode, "open-loop | closed-loop");
  simulate->add_option("--traffic", sim.traffic, "log-replay | idm | adversarial");
  simulate->add_option("--scorer", sim.scorer,
                       "native | truncated-q | truncated-q-replan | oracle");
  simulate->add_option("--policy", sim.policy,
                       "expert | constant-velocity | noisy-expert | lattice");
  simulate->add_option("--sigma", sim.sigma, "noisy-expert lateral scale [m]");
  simulate->add_option("--n-candidates", sim.n_candidates, "noisy-expert candidate count");
  simulate->add_option("--drift", sim.drift, "noisy-expert longitudinal drift [m/s per s]");
  simulate->add_flag("--include-expert,!--no-include-expert", sim.include_expert,
                     "keep the exact expert as candidate 0");
  simulate->add_option("--speeds", sim.speeds, "lattice speed grid [m/s]");
  simulate->add_option("--curvatures", sim.curvatures, "lattice curvature grid [1/m]");
  simulate->add_option("--replan-rate", sim.replan_rate, "steps between inferences");
  simulate->add_option("--horizon", sim.horizon, "evaluated steps T after warm-up");
  simulate->add_option("--plan-horizon", sim.plan_horizon, "plan length H in steps");
  simulate->add_option("--gamma", sim.gamma, "rollout discount");
  simulate->add_option("--warmup", sim.warmup, "warm-up replay [s]");
  simulate->add_option("--seed", sim.seed, "suite seed");
  simulate->add_option("--threads", sim.threads, "worker cap (0 = BRIDGESIM_THREADS/auto)");
  simulate->add_flag("--export-frames", sim.export_frames, "write per-frame CSVs");
  simulate->add_option("--out", sim.out, "output directory")->required();

  std::string report_path;
  CLI::App* score = app.add_subcommand("score", "Recompute and verify a report's scores");
  score->add_option("--report", report_path, "episode report JSON")->required();

  std::string spec_path, analyze_out;
  CLI::App* analyze = app.add_subcommand("analyze", "Run experiment protocols from a spec");
  analyze->add_option("--spec", spec_path, "experiment spec JSON")->required();
  analyze->add_option("--out", analyze_out, "output directory")->required();

  std::string validate_path;
  CLI::App* validate = app.add_subcommand("validate", "Schema-check a scenario file");
  validate->add_option("--scenario", validate_path, "scenario JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (generate->parsed()) return run_generate(gen, *generate);
    if (simulate->parsed()) return run_simulate(sim, *simulate);
    if (score->parsed()) return run_score(report_path);
    if (analyze->parsed()) return run_analyze(spec_path, analyze_out);
    if (validate->parsed()) return run_validate(validate_path);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}
