#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bridgesim/geometry.hpp"
#include "bridgesim/metrics.hpp"

namespace bridgesim {

struct SubscoreMeans {
  double nc = 0.0, dac = 0.0, tlc = 0.0, ddc = 0.0;
  double lk = 0.0, ttc = 0.0, hc = 0.0, ec = 0.0;
  std::optional<double> ep;
};

/// Per-episode closed-loop (or open-loop) result. `wallclock_s` is runtime
/// telemetry only; it is deliberately left out of the serialized form so
/// repeated runs produce byte-identical files.
struct EpisodeReport {
  std::string scenario_id;
  std::string policy;
  std::string mode;     // "open-loop" | "closed-loop"
  double ds = 0.0;          // 0..100
  double epdms_mean = 0.0;  // 0..100
  double rc = 0.0;          // 0..1
  SubscoreMeans means;      // 0..1 per frame mean
  std::vector<FrameScore> frames;
  std::vector<Vec2> ego_trace;  // realized (or logged) ego positions per step
  std::string config_echo;      // canonical engine-config JSON
  std::uint64_t seed = 0;
  double min_ade = 0.0;  // open-loop only
  bool collision_terminated = false;
  bool route_completed_early = false;
  bool emergency_brake_used = false;
  int end_step = 0;  // scenario step at which the episode finished
  std::string error;  // non-empty when the episode failed to run
  double wallclock_s = 0.0;  // excluded from serialization
};

SubscoreMeans subscore_means(std::span<const FrameScore> frames);

std::string report_to_json(const EpisodeReport& report);
EpisodeReport report_from_json(std::string_view bytes);

void save_report_file(const EpisodeReport& report, const std::string& path);
EpisodeReport load_report_file(const std::string& path);

/// FNV-1a over the canonical serialization; equal runs hash equal.
std::uint64_t report_hash(const EpisodeReport& report);

/// Suite CSV: scenario_id, ds, epdms_mean, rc, nc, dac, tlc, ddc, lk, ttc,
/// hc, ec, frames, seed. Subscore columns are scaled to 0..100.
std::string suite_csv(std::span<const EpisodeReport> reports);

/// Per-frame CSV: step, nc, dac, tlc, ddc, lk, ttc, hc, ec, ep, epdms.
std::string frames_csv(const EpisodeReport& report);

}  // namespace bridgesim
