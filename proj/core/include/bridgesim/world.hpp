#pragma once

#include <string>
#include <vector>

#include "bridgesim/geometry.hpp"
#include "bridgesim/scenario.hpp"
#include "bridgesim/vehicle.hpp"

namespace bridgesim {

/// One non-ego participant at the current step. Speed and acceleration are
/// longitudinal (along the heading); the spatial velocity follows from them.
struct AgentState {
  std::string object_id;
  ObjectType type = ObjectType::Vehicle;
  Pose2 pose;
  double speed = 0.0;   // m/s
  double accel = 0.0;   // m/s^2
  Dims dims;
  std::string lane_id;  // current lane, empty when unknown

  Vec2 velocity() const { return Vec2{std::cos(pose.heading), std::sin(pose.heading)} * speed; }
  Vec2 accel_vec() const { return Vec2{std::cos(pose.heading), std::sin(pose.heading)} * accel; }
  OrientedBox footprint() const { return {pose, dims.length, dims.width}; }
};

/// Trailing ego kinematics at sim_dt, used by the comfort metrics and policy
/// observations.
struct HistorySample {
  Pose2 pose;
  double speed = 0.0;
  double accel = 0.0;
  double yaw_rate = 0.0;
  double lateral_offset = 0.0;  // signed offset from the nearest lane center
};

class HistoryBuffer {
 public:
  explicit HistoryBuffer(std::size_t capacity = 64) : capacity_(capacity) {}

  void push(const HistorySample& sample) {
    samples_.push_back(sample);
    if (samples_.size() > capacity_) {
      samples_.erase(samples_.begin(), samples_.begin() + (samples_.size() - capacity_));
    }
  }
  void clear() { samples_.clear(); }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const HistorySample& back() const { return samples_.back(); }
  const std::vector<HistorySample>& samples() const { return samples_; }

  /// Last `n` positions, oldest first.
  std::vector<Vec2> trailing_positions(std::size_t n) const {
    const std::size_t count = std::min(n, samples_.size());
    std::vector<Vec2> out;
    out.reserve(count);
    for (std::size_t i = samples_.size() - count; i < samples_.size(); ++i) {
      out.push_back(samples_[i].pose.position);
    }
    return out;
  }

  std::vector<double> trailing_offsets(std::size_t n) const {
    const std::size_t count = std::min(n, samples_.size());
    std::vector<double> out;
    out.reserve(count);
    for (std::size_t i = samples_.size() - count; i < samples_.size(); ++i) {
      out.push_back(samples_[i].lateral_offset);
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::vector<HistorySample> samples_;
};

/// Live simulation state at one step. Map and scenario are shared read-only.
struct WorldState {
  int step = 0;
  EgoState ego;
  Dims ego_dims;
  std::vector<AgentState> agents;
  const ScenarioDescription* scenario = nullptr;
  const MapIndex* map = nullptr;
  HistoryBuffer history;

  OrientedBox ego_footprint() const { return {ego.pose, ego_dims.length, ego_dims.width}; }
  Signal signal_on(const std::string& lane_id) const {
    return scenario != nullptr ? scenario->signal_at(lane_id, step) : Signal::GO;
  }
};

}  // namespace bridgesim
