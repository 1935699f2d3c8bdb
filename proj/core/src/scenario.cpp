#include "bridgesim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "bridgesim/errors.hpp"

namespace bridgesim {

using json = nlohmann::json;

std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::LaneCenter: return "lane_center";
    case FeatureKind::RoadBoundary: return "road_boundary";
    case FeatureKind::Crosswalk: return "crosswalk";
    case FeatureKind::StopLine: return "stop_line";
    case FeatureKind::DrivableArea: return "drivable_area";
  }
  return "unknown";
}

std::string to_string(ObjectType t) {
  switch (t) {
    case ObjectType::Ego: return "ego";
    case ObjectType::Vehicle: return "vehicle";
    case ObjectType::Pedestrian: return "pedestrian";
    case ObjectType::Cyclist: return "cyclist";
  }
  return "unknown";
}

std::string to_string(Signal s) {
  switch (s) {
    case Signal::STOP: return "STOP";
    case Signal::WAIT: return "WAIT";
    case Signal::GO: return "GO";
  }
  return "unknown";
}

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "lane_center") return FeatureKind::LaneCenter;
  if (s == "road_boundary") return FeatureKind::RoadBoundary;
  if (s == "crosswalk") return FeatureKind::Crosswalk;
  if (s == "stop_line") return FeatureKind::StopLine;
  if (s == "drivable_area") return FeatureKind::DrivableArea;
  throw ParseError("unknown map feature kind: " + s);
}

ObjectType object_type_from_string(const std::string& s) {
  if (s == "ego") return ObjectType::Ego;
  if (s == "vehicle") return ObjectType::Vehicle;
  if (s == "pedestrian") return ObjectType::Pedestrian;
  if (s == "cyclist") return ObjectType::Cyclist;
  throw ParseError("unknown object type: " + s);
}

Signal signal_from_string(const std::string& s) {
  if (s == "STOP") return Signal::STOP;
  if (s == "WAIT") return Signal::WAIT;
  if (s == "GO") return Signal::GO;
  throw ParseError("unknown signal state: " + s);
}

const Track* ScenarioDescription::find_track(const std::string& object_id) const {
  for (const Track& t : tracks) {
    if (t.object_id == object_id) return &t;
  }
  return nullptr;
}

const Track& ScenarioDescription::ego_track() const {
  const Track* t = find_track(ego_track_id);
  if (t == nullptr) throw ValidationError("scenario '" + id + "' has no ego track");
  return *t;
}

const MapFeature* ScenarioDescription::find_feature(const std::string& feature_id) const {
  for (const MapFeature& f : map_features) {
    if (f.id == feature_id) return &f;
  }
  return nullptr;
}

Signal ScenarioDescription::signal_at(const std::string& lane_id, int step) const {
  for (const DynamicMapState& d : dynamic_states) {
    if (d.lane_id != lane_id) continue;
    if (d.signal_sequence.empty()) return Signal::GO;
    const int i = std::clamp(step, 0, static_cast<int>(d.signal_sequence.size()) - 1);
    return d.signal_sequence[static_cast<std::size_t>(i)];
  }
  return Signal::GO;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

void require(bool cond, const std::string& message) {
  if (!cond) throw ValidationError(message);
}

bool heading_normalized(double h) { return h > -kPi - 1e-12 && h <= kPi + 1e-12; }

}  // namespace

void validate_scenario(const ScenarioDescription& s) {
  require(!s.id.empty(), "scenario.id: must be non-empty");
  require(s.dt > 0.0, "scenario.dt: must be positive");
  require(s.step_count >= 1, "scenario.step_count: must be >= 1");
  require(s.handedness == Handedness::Right, "scenario.handedness: stored data must be right-handed");
  require(s.anchor.finite(), "scenario.anchor: must be finite");

  int ego_matches = 0;
  std::unordered_set<std::string> track_ids;
  for (const Track& t : s.tracks) {
    require(!t.object_id.empty(), "track.object_id: must be non-empty");
    require(track_ids.insert(t.object_id).second, "track.object_id: duplicate '" + t.object_id + "'");
    require(t.dims.length > 0.0 && t.dims.width > 0.0 && t.dims.height > 0.0,
            "track '" + t.object_id + "'.dims: must be strictly positive");
    require(static_cast<int>(t.states.size()) == s.step_count,
            "track '" + t.object_id + "'.states: length must equal scenario step_count");
    for (std::size_t i = 0; i < t.states.size(); ++i) {
      const TrackState& st = t.states[i];
      if (!st.valid) continue;
      require(st.pose.position.finite() && std::isfinite(st.pose.heading) && st.velocity.finite(),
              "track '" + t.object_id + "'.states[" + std::to_string(i) + "]: non-finite values");
      require(heading_normalized(st.pose.heading),
              "track '" + t.object_id + "'.states[" + std::to_string(i) + "].heading: outside (-pi, pi]");
    }
    if (t.object_id == s.ego_track_id) {
      ++ego_matches;
      require(t.object_type == ObjectType::Ego,
              "track '" + t.object_id + "'.object_type: ego track must have type ego");
      require(!t.states.empty() && t.states.front().valid,
              "ego track: state at step 0 must be valid");
      require(t.states.front().pose.position.norm() <= 1e-6,
              "ego track: position at step 0 must equal the origin after anchoring");
    }
  }
  require(ego_matches == 1, "scenario.ego_track_id: exactly one matching track required");

  std::unordered_set<std::string> lane_ids;
  std::unordered_set<std::string> feature_ids;
  for (const MapFeature& f : s.map_features) {
    require(!f.id.empty(), "map_feature.id: must be non-empty");
    require(feature_ids.insert(f.id).second, "map_feature.id: duplicate '" + f.id + "'");
    require(f.polyline.size() >= 2, "map_feature '" + f.id + "'.polyline: needs >= 2 points");
    for (const Vec2& p : f.polyline) {
      require(p.finite(), "map_feature '" + f.id + "'.polyline: non-finite point");
    }
    if (f.kind == FeatureKind::LaneCenter) lane_ids.insert(f.id);
    if (f.kind == FeatureKind::DrivableArea) {
      std::span<const Vec2> ring(f.polyline);
      require(ring.size() >= 3, "map_feature '" + f.id + "': drivable ring needs >= 3 points");
      require(ring_is_simple(ring), "map_feature '" + f.id + "': drivable ring self-intersects");
    }
  }

  for (const DynamicMapState& d : s.dynamic_states) {
    require(static_cast<int>(d.signal_sequence.size()) == s.step_count,
            "dynamic_state '" + d.lane_id + "': sequence length must equal step_count");
    require(lane_ids.contains(d.lane_id),
            "dynamic_state '" + d.lane_id + "': lane_id does not reference a lane_center feature");
  }
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

namespace {

json vec2_to_json(const Vec2& v) { return json{{"x", v.x}, {"y", v.y}}; }

Vec2 vec2_from_json(const json& j) { return {j.at("x").get<double>(), j.at("y").get<double>()}; }

json track_state_to_json(const TrackState& st) {
  return json{{"pose", {{"position", vec2_to_json(st.pose.position)}, {"heading", st.pose.heading}}},
              {"velocity", vec2_to_json(st.velocity)},
              {"valid", st.valid}};
}

TrackState track_state_from_json(const json& j) {
  TrackState st;
  const json& pose = j.at("pose");
  st.pose.position = vec2_from_json(pose.at("position"));
  st.pose.heading = wrap_angle(pose.at("heading").get<double>());
  st.velocity = vec2_from_json(j.at("velocity"));
  st.valid = j.at("valid").get<bool>();
  return st;
}

}  // namespace

std::string serialize_scenario(const ScenarioDescription& s) {
  validate_scenario(s);

  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["id"] = s.id;
  doc["dt"] = s.dt;
  doc["step_count"] = s.step_count;
  doc["anchor"] = vec2_to_json(s.anchor);
  doc["ego_track_id"] = s.ego_track_id;
  doc["source"] = s.source;
  doc["handedness"] = "right";

  json features = json::array();
  for (const MapFeature& f : s.map_features) {
    json jf;
    jf["id"] = f.id;
    jf["kind"] = to_string(f.kind);
    json poly = json::array();
    for (const Vec2& p : f.polyline) poly.push_back(vec2_to_json(p));
    jf["polyline"] = std::move(poly);
    json attrs = json::object();
    if (f.attributes.speed_limit) attrs["speed_limit"] = *f.attributes.speed_limit;
    if (!f.attributes.successors.empty()) attrs["successors"] = f.attributes.successors;
    if (f.attributes.gated_lane) attrs["gated_lane"] = *f.attributes.gated_lane;
    if (!attrs.empty()) jf["attributes"] = std::move(attrs);
    features.push_back(std::move(jf));
  }
  doc["map_features"] = std::move(features);

  json tracks = json::array();
  for (const Track& t : s.tracks) {
    json jt;
    jt["object_id"] = t.object_id;
    jt["object_type"] = to_string(t.object_type);
    jt["dims"] = {{"length", t.dims.length}, {"width", t.dims.width}, {"height", t.dims.height}};
    json states = json::array();
    for (const TrackState& st : t.states) states.push_back(track_state_to_json(st));
    jt["states"] = std::move(states);
    tracks.push_back(std::move(jt));
  }
  doc["tracks"] = std::move(tracks);

  json dynamics = json::array();
  for (const DynamicMapState& d : s.dynamic_states) {
    json jd;
    jd["lane_id"] = d.lane_id;
    json seq = json::array();
    for (const Signal sig : d.signal_sequence) seq.push_back(to_string(sig));
    jd["signal_sequence"] = std::move(seq);
    dynamics.push_back(std::move(jd));
  }
  doc["dynamic_states"] = std::move(dynamics);

  return doc.dump();
}

ScenarioDescription parse_scenario(std::string_view bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed scenario document: ") + e.what());
  }

  ScenarioDescription s;
  try {
    const int version = doc.at("schema_version").get<int>();
    if (version != kSchemaVersion) {
      throw ParseError("unsupported schema_version " + std::to_string(version) + ", expected " +
                       std::to_string(kSchemaVersion));
    }
    s.id = doc.at("id").get<std::string>();
    s.dt = doc.at("dt").get<double>();
    s.step_count = doc.at("step_count").get<int>();
    s.anchor = vec2_from_json(doc.at("anchor"));
    s.ego_track_id = doc.at("ego_track_id").get<std::string>();
    s.source = doc.value("source", std::string{});
    const std::string handed = doc.at("handedness").get<std::string>();
    if (handed != "right") throw ParseError("scenario handedness must be 'right', got '" + handed + "'");
    s.handedness = Handedness::Right;

    for (const json& jf : doc.at("map_features")) {
      MapFeature f;
      f.id = jf.at("id").get<std::string>();
      f.kind = feature_kind_from_string(jf.at("kind").get<std::string>());
      for (const json& jp : jf.at("polyline")) f.polyline.push_back(vec2_from_json(jp));
      if (jf.contains("attributes")) {
        const json& attrs = jf.at("attributes");
        if (attrs.contains("speed_limit")) f.attributes.speed_limit = attrs.at("speed_limit").get<double>();
        if (attrs.contains("successors")) {
          f.attributes.successors = attrs.at("successors").get<std::vector<std::string>>();
        }
        if (attrs.contains("gated_lane")) f.attributes.gated_lane = attrs.at("gated_lane").get<std::string>();
      }
      s.map_features.push_back(std::move(f));
    }

    for (const json& jt : doc.at("tracks")) {
      Track t;
      t.object_id = jt.at("object_id").get<std::string>();
      t.object_type = object_type_from_string(jt.at("object_type").get<std::string>());
      const json& dims = jt.at("dims");
      t.dims = {dims.at("length").get<double>(), dims.at("width").get<double>(),
                dims.at("height").get<double>()};
      for (const json& js : jt.at("states")) t.states.push_back(track_state_from_json(js));
      s.tracks.push_back(std::move(t));
    }

    for (const json& jd : doc.at("dynamic_states")) {
      DynamicMapState d;
      d.lane_id = jd.at("lane_id").get<std::string>();
      for (const json& sig : jd.at("signal_sequence")) {
        d.signal_sequence.push_back(signal_from_string(sig.get<std::string>()));
      }
      s.dynamic_states.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario document missing or mistyped field: ") + e.what());
  }

  validate_scenario(s);
  return s;
}

ScenarioDescription load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open scenario file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

void save_scenario_file(const ScenarioDescription& scenario, const std::string& path) {
  const std::string bytes = serialize_scenario(scenario);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SimulationError("cannot write scenario file: " + path);
  out << bytes;
}

// ---------------------------------------------------------------------------
// Normalization pipeline
// ---------------------------------------------------------------------------

Track resample_track(const Track& track, double source_dt, double target_dt) {
  if (source_dt <= 0.0 || target_dt <= 0.0) {
    throw SimulationError("resample_track: sample periods must be positive");
  }
  const int valid_count =
      static_cast<int>(std::count_if(track.states.begin(), track.states.end(),
                                     [](const TrackState& s) { return s.valid; }));
  if (valid_count < 2) {
    throw SimulationError("resample_track: track '" + track.object_id + "' has fewer than 2 valid states");
  }

  const std::size_t n = track.states.size();
  const double duration = static_cast<double>(n - 1) * source_dt;

  std::vector<double> times;
  for (int j = 0;; ++j) {
    const double t = j * target_dt;
    if (t > duration + 1e-9) break;
    times.push_back(std::min(t, duration));
  }
  if (times.back() < duration - 1e-9) times.push_back(duration);  // keep the final timestamp

  Track out;
  out.object_id = track.object_id;
  out.object_type = track.object_type;
  out.dims = track.dims;
  out.states.reserve(times.size());

  for (const double t : times) {
    const double u = t / source_dt;
    std::size_t i = static_cast<std::size_t>(std::floor(u + 1e-9));
    i = std::min(i, n - 1);
    double alpha = u - static_cast<double>(i);
    if (alpha < 1e-9) alpha = 0.0;

    if (alpha == 0.0) {
      out.states.push_back(track.states[i]);  // exact sample hit, validity included
      continue;
    }
    const TrackState& a = track.states[i];
    const TrackState& b = track.states[i + 1];
    TrackState st;
    if (!a.valid || !b.valid) {
      st.valid = false;  // never fabricate motion across invalid gaps
      out.states.push_back(st);
      continue;
    }
    st.valid = true;
    st.pose.position = a.pose.position + (b.pose.position - a.pose.position) * alpha;
    st.pose.heading = interpolate_heading(a.pose.heading, b.pose.heading, alpha);
    st.velocity = a.velocity + (b.velocity - a.velocity) * alpha;
    out.states.push_back(st);
  }
  return out;
}

ScenarioDescription normalize_chirality(const ScenarioDescription& scenario,
                                        Handedness source_handedness) {
  ScenarioDescription out = scenario;
  out.handedness = Handedness::Right;
  if (source_handedness == Handedness::Right) return out;

  for (MapFeature& f : out.map_features) {
    for (Vec2& p : f.polyline) p.y = -p.y;
  }
  out.anchor.y = -out.anchor.y;
  for (Track& t : out.tracks) {
    for (TrackState& st : t.states) {
      st.pose.position.y = -st.pose.position.y;
      st.pose.heading = wrap_angle(-st.pose.heading);
      st.velocity.y = -st.velocity.y;
    }
  }
  return out;
}

ScenarioDescription anchor_scenario(const ScenarioDescription& scenario) {
  const Track* ego = scenario.find_track(scenario.ego_track_id);
  if (ego == nullptr || ego->states.empty() || !ego->states.front().valid) {
    throw SimulationError("anchor_scenario: ego state at step 0 is missing or invalid");
  }
  const Vec2 offset = ego->states.front().pose.position;

  ScenarioDescription out = scenario;
  out.anchor = scenario.anchor + offset;
  for (MapFeature& f : out.map_features) {
    for (Vec2& p : f.polyline) p -= offset;
  }
  for (Track& t : out.tracks) {
    for (TrackState& st : t.states) st.pose.position -= offset;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lane queries
// ---------------------------------------------------------------------------

namespace {

LaneQuery best_lane_query(const std::vector<std::pair<const std::string*, const Polyline*>>& lanes,
                          const Vec2& position) {
  if (lanes.empty()) throw SimulationError("query_lane: map contains no lane_center features");
  LaneQuery best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (const auto& [id, line] : lanes) {
    const PolylineProjection proj = line->project(position);
    if (proj.distance < best_dist) {
      best_dist = proj.distance;
      best.lane_id = *id;
      best.lane_heading = line->segment_heading(proj.segment);
      best.lateral_offset = proj.signed_lateral;
      best.arclength = proj.arclength;
    }
  }
  return best;
}

}  // namespace

LaneQuery query_lane(std::span<const MapFeature> map_features, const Vec2& position) {
  std::vector<Polyline> storage;
  std::vector<std::pair<const std::string*, const Polyline*>> lanes;
  storage.reserve(map_features.size());
  for (const MapFeature& f : map_features) {
    if (f.kind != FeatureKind::LaneCenter) continue;
    storage.emplace_back(f.polyline);
    lanes.emplace_back(&f.id, &storage.back());
  }
  return best_lane_query(lanes, position);
}

MapIndex::MapIndex(const ScenarioDescription& scenario) {
  for (const MapFeature& f : scenario.map_features) {
    switch (f.kind) {
      case FeatureKind::LaneCenter: {
        Lane lane;
        lane.feature = &f;
        lane.centerline = Polyline(f.polyline);
        lane.speed_limit = f.attributes.speed_limit.value_or(0.0);
        lanes_.push_back(std::move(lane));
        break;
      }
      case FeatureKind::StopLine: {
        StopLine sl;
        sl.feature = &f;
        sl.gated_lane = f.attributes.gated_lane.value_or("");
        stop_lines_.push_back(std::move(sl));
        break;
      }
      case FeatureKind::DrivableArea:
        rings_.push_back(&f);
        break;
      default:
        break;
    }
  }
}

LaneQuery MapIndex::query_lane(const Vec2& position) const {
  std::vector<std::pair<const std::string*, const Polyline*>> lanes;
  lanes.reserve(lanes_.size());
  for (const Lane& l : lanes_) lanes.emplace_back(&l.feature->id, &l.centerline);
  return best_lane_query(lanes, position);
}

const MapIndex::Lane* MapIndex::lane_by_id(const std::string& id) const {
  for (const Lane& l : lanes_) {
    if (l.feature->id == id) return &l;
  }
  return nullptr;
}

bool MapIndex::footprint_in_drivable_area(const OrientedBox& footprint) const {
  if (rings_.empty()) return false;
  for (const Vec2& corner : footprint.corners()) {
    bool covered = false;
    for (const MapFeature* ring : rings_) {
      if (point_in_polygon(ring->polyline, corner)) {
        covered = true;
        break;
      }
    }
    if (!covered) return false;
  }
  return true;
}

}  // namespace bridgesim
