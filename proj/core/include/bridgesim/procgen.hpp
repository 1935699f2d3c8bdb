#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bridgesim/scenario.hpp"

namespace bridgesim {

/// Procedural generation backend: deterministic synthetic scenarios so every
/// experiment runs without external datasets.
struct ProcGenConfig {
  enum class Layout { Straight, Arc, Intersection };

  Layout layout = Layout::Straight;
  int lane_count = 1;
  double lane_width = 3.5;      // m
  double route_length = 150.0;  // m
  int agent_count = 0;
  double ego_cruise_speed = 8.0;  // m/s
  bool signalized = false;
  double duration = 20.0;  // s
  double dt = 0.1;         // s
};

std::string to_string(ProcGenConfig::Layout layout);
ProcGenConfig::Layout layout_from_string(const std::string& s);

/// Builds a complete, validated, anchored scenario from (config, seed):
/// lane centers, road boundaries, a drivable ring, an IDM-rolled ego log at
/// cruise speed, collision-free background logs, and signal sequences when
/// signalized. Identical inputs produce identical scenarios. Throws
/// SimulationError when no collision-free placement exists after bounded
/// retries.
ScenarioDescription generate_scenario(const ProcGenConfig& config, std::uint64_t seed);

/// n scenarios with seeds seed, seed+1, ..., seed+n-1.
std::vector<ScenarioDescription> generate_suite(const ProcGenConfig& config, int n,
                                                std::uint64_t seed);

std::string procgen_config_to_json(const ProcGenConfig& config);
ProcGenConfig procgen_config_from_json(std::string_view bytes);

}  // namespace bridgesim
