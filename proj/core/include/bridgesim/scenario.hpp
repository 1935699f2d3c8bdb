#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bridgesim/geometry.hpp"

namespace bridgesim {

inline constexpr int kSchemaVersion = 1;
inline constexpr double kNativeDt = 0.1;  // 10 Hz control frequency

enum class FeatureKind { LaneCenter, RoadBoundary, Crosswalk, StopLine, DrivableArea };
enum class ObjectType { Ego, Vehicle, Pedestrian, Cyclist };
enum class Signal { STOP, WAIT, GO };
enum class Handedness { Left, Right };

std::string to_string(FeatureKind k);
std::string to_string(ObjectType t);
std::string to_string(Signal s);
FeatureKind feature_kind_from_string(const std::string& s);
ObjectType object_type_from_string(const std::string& s);
Signal signal_from_string(const std::string& s);

struct FeatureAttributes {
  std::optional<double> speed_limit;            // m/s, lane centers
  std::vector<std::string> successors;          // downstream lane ids
  std::optional<std::string> gated_lane;        // stop lines: the lane they gate

  bool operator==(const FeatureAttributes&) const = default;
};

struct MapFeature {
  std::string id;
  FeatureKind kind = FeatureKind::LaneCenter;
  std::vector<Vec2> polyline;  // closed ring when kind == DrivableArea
  FeatureAttributes attributes;

  bool operator==(const MapFeature&) const = default;
};

struct TrackState {
  Pose2 pose;
  Vec2 velocity;  // m/s, world frame
  bool valid = false;

  bool operator==(const TrackState&) const = default;
};

struct Dims {
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;

  bool operator==(const Dims&) const = default;
};

struct Track {
  std::string object_id;
  ObjectType object_type = ObjectType::Vehicle;
  Dims dims;
  std::vector<TrackState> states;  // one per scenario step

  bool operator==(const Track&) const = default;
};

struct DynamicMapState {
  std::string lane_id;
  std::vector<Signal> signal_sequence;  // one per scenario step

  bool operator==(const DynamicMapState&) const = default;
};

/// The unified serialized episode: map polylines, agent tracks, traffic-light
/// sequences, and anchor metadata. All spatial data is right-handed and
/// anchored so the ego position at step 0 is the origin.
struct ScenarioDescription {
  std::string id;
  double dt = kNativeDt;
  int step_count = 0;
  Vec2 anchor;  // world offset removed during anchoring
  std::string ego_track_id;
  std::vector<MapFeature> map_features;
  std::vector<Track> tracks;
  std::vector<DynamicMapState> dynamic_states;
  std::string source;
  Handedness handedness = Handedness::Right;

  bool operator==(const ScenarioDescription&) const = default;

  const Track* find_track(const std::string& object_id) const;
  const Track& ego_track() const;  // throws ValidationError when absent
  const MapFeature* find_feature(const std::string& id) const;
  /// Signal on `lane_id` at `step`; steps beyond the log clamp to the last
  /// entry. Lanes without a dynamic state report GO.
  Signal signal_at(const std::string& lane_id, int step) const;
};

// ---------------------------------------------------------------------------
// Validation and serialization
// ---------------------------------------------------------------------------

/// Checks every schema invariant; throws ValidationError naming the first
/// offending field.
void validate_scenario(const ScenarioDescription& scenario);

/// Canonical JSON document (schema_version 1). Equal scenarios serialize to
/// identical bytes; floats keep full round-trip precision.
std::string serialize_scenario(const ScenarioDescription& scenario);

/// Inverse of serialize_scenario. Headings are normalized to (-pi, pi] on
/// load; all other fields round-trip bit-exactly.
ScenarioDescription parse_scenario(std::string_view bytes);

ScenarioDescription load_scenario_file(const std::string& path);
void save_scenario_file(const ScenarioDescription& scenario, const std::string& path);

// ---------------------------------------------------------------------------
// Normalization pipeline
// ---------------------------------------------------------------------------

/// Resamples a track from source_dt to target_dt. Positions and velocities
/// interpolate linearly, headings along the shortest arc. Target samples
/// falling strictly between a valid and an invalid source state are invalid.
Track resample_track(const Track& track, double source_dt, double target_dt = kNativeDt);

/// Converts a left-handed scenario to the right-handed convention by negating
/// y coordinates, headings, and y velocities. Right-handed input is returned
/// unchanged. The transform is an involution.
ScenarioDescription normalize_chirality(const ScenarioDescription& scenario,
                                        Handedness source_handedness);

/// Translates all spatial data so the ego position at step 0 is the origin;
/// the removed offset accumulates into `anchor`. Idempotent.
ScenarioDescription anchor_scenario(const ScenarioDescription& scenario);

// ---------------------------------------------------------------------------
// Lane queries
// ---------------------------------------------------------------------------

struct LaneQuery {
  std::string lane_id;
  double lane_heading = 0.0;     // tangent of the nearest segment
  double lateral_offset = 0.0;   // signed, positive to the left of travel
  double arclength = 0.0;        // longitudinal position of the projection
};

/// Nearest lane-center lookup by unsigned lateral distance.
LaneQuery query_lane(std::span<const MapFeature> map_features, const Vec2& position);

/// Per-scenario geometry cache: lane polylines, drivable rings, stop lines.
/// Read-only after construction; safe to share across episode workers.
class MapIndex {
 public:
  struct Lane {
    const MapFeature* feature = nullptr;
    Polyline centerline;
    double speed_limit = 0.0;  // 0 = unspecified
  };
  struct StopLine {
    const MapFeature* feature = nullptr;
    std::string gated_lane;
  };

  MapIndex() = default;
  explicit MapIndex(const ScenarioDescription& scenario);

  const std::vector<Lane>& lanes() const { return lanes_; }
  const std::vector<StopLine>& stop_lines() const { return stop_lines_; }
  const std::vector<const MapFeature*>& drivable_rings() const { return rings_; }

  LaneQuery query_lane(const Vec2& position) const;  // throws when no lanes
  const Lane* lane_by_id(const std::string& id) const;
  bool footprint_in_drivable_area(const OrientedBox& footprint) const;

 private:
  std::vector<Lane> lanes_;
  std::vector<StopLine> stop_lines_;
  std::vector<const MapFeature*> rings_;
};

}  // namespace bridgesim
