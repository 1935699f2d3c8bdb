#include "bridgesim/report.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bridgesim/errors.hpp"

namespace bridgesim {

using json = nlohmann::json;

SubscoreMeans subscore_means(std::span<const FrameScore> frames) {
  SubscoreMeans m;
  if (frames.empty()) return m;
  double ep_sum = 0.0;
  bool has_ep = true;
  for (const FrameScore& f : frames) {
    m.nc += f.nc ? 1.0 : 0.0;
    m.dac += f.dac ? 1.0 : 0.0;
    m.tlc += f.tlc ? 1.0 : 0.0;
    m.ddc += f.ddc ? 1.0 : 0.0;
    m.lk += f.lk;
    m.ttc += f.ttc;
    m.hc += f.hc;
    m.ec += f.ec;
    if (f.ep.has_value()) {
      ep_sum += *f.ep;
    } else {
      has_ep = false;
    }
  }
  const double n = static_cast<double>(frames.size());
  m.nc /= n;
  m.dac /= n;
  m.tlc /= n;
  m.ddc /= n;
  m.lk /= n;
  m.ttc /= n;
  m.hc /= n;
  m.ec /= n;
  if (has_ep) m.ep = ep_sum / n;
  return m;
}

namespace {

json frame_to_json(const FrameScore& f) {
  json j;
  j["nc"] = f.nc;
  j["dac"] = f.dac;
  j["tlc"] = f.tlc;
  j["ddc"] = f.ddc;
  j["lk"] = f.lk;
  j["ttc"] = f.ttc;
  j["hc"] = f.hc;
  j["ec"] = f.ec;
  if (f.ep.has_value()) j["ep"] = *f.ep;
  j["epdms"] = f.epdms;
  return j;
}

FrameScore frame_from_json(const json& j) {
  FrameScore f;
  f.nc = j.at("nc").get<bool>();
  f.dac = j.at("dac").get<bool>();
  f.tlc = j.at("tlc").get<bool>();
  f.ddc = j.at("ddc").get<bool>();
  f.lk = j.at("lk").get<double>();
  f.ttc = j.at("ttc").get<double>();
  f.hc = j.at("hc").get<double>();
  f.ec = j.at("ec").get<double>();
  if (j.contains("ep")) f.ep = j.at("ep").get<double>();
  f.epdms = j.at("epdms").get<double>();
  return f;
}

}  // namespace

std::string report_to_json(const EpisodeReport& r) {
  json j;
  j["scenario_id"] = r.scenario_id;
  j["policy"] = r.policy;
  j["mode"] = r.mode;
  j["ds"] = r.ds;
  j["epdms_mean"] = r.epdms_mean;
  j["rc"] = r.rc;
  json means;
  means["nc"] = r.means.nc;
  means["dac"] = r.means.dac;
  means["tlc"] = r.means.tlc;
  means["ddc"] = r.means.ddc;
  means["lk"] = r.means.lk;
  means["ttc"] = r.means.ttc;
  means["hc"] = r.means.hc;
  means["ec"] = r.means.ec;
  if (r.means.ep.has_value()) means["ep"] = *r.means.ep;
  j["means"] = std::move(means);
  json frames = json::array();
  for (const FrameScore& f : r.frames) frames.push_back(frame_to_json(f));
  j["frames"] = std::move(frames);
  json trace = json::array();
  for (const Vec2& p : r.ego_trace) trace.push_back(json{{"x", p.x}, {"y", p.y}});
  j["ego_trace"] = std::move(trace);
  if (!r.config_echo.empty()) {
    j["config"] = json::parse(r.config_echo);
  } else {
    j["config"] = json::object();
  }
  j["seed"] = r.seed;
  j["min_ade"] = r.min_ade;
  j["collision_terminated"] = r.collision_terminated;
  j["route_completed_early"] = r.route_completed_early;
  j["emergency_brake_used"] = r.emergency_brake_used;
  j["end_step"] = r.end_step;
  if (!r.error.empty()) j["error"] = r.error;
  return j.dump();
}

EpisodeReport report_from_json(std::string_view bytes) {
  json j;
  try {
    j = json::parse(bytes);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed report document: ") + e.what());
  }
  EpisodeReport r;
  try {
    r.scenario_id = j.at("scenario_id").get<std::string>();
    r.policy = j.at("policy").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.ds = j.at("ds").get<double>();
    r.epdms_mean = j.at("epdms_mean").get<double>();
    r.rc = j.at("rc").get<double>();
    const json& means = j.at("means");
    r.means.nc = means.at("nc").get<double>();
    r.means.dac = means.at("dac").get<double>();
    r.means.tlc = means.at("tlc").get<double>();
    r.means.ddc = means.at("ddc").get<double>();
    r.means.lk = means.at("lk").get<double>();
    r.means.ttc = means.at("ttc").get<double>();
    r.means.hc = means.at("hc").get<double>();
    r.means.ec = means.at("ec").get<double>();
    if (means.contains("ep")) r.means.ep = means.at("ep").get<double>();
    for (const json& f : j.at("frames")) r.frames.push_back(frame_from_json(f));
    for (const json& p : j.at("ego_trace")) {
      r.ego_trace.push_back({p.at("x").get<double>(), p.at("y").get<double>()});
    }
    r.config_echo = j.at("config").dump();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.min_ade = j.at("min_ade").get<double>();
    r.collision_terminated = j.at("collision_terminated").get<bool>();
    r.route_completed_early = j.at("route_completed_early").get<bool>();
    r.emergency_brake_used = j.at("emergency_brake_used").get<bool>();
    r.end_step = j.at("end_step").get<int>();
    if (j.contains("error")) r.error = j.at("error").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("report document missing or mistyped field: ") + e.what());
  }
  return r;
}

void save_report_file(const EpisodeReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SimulationError("cannot write report file: " + path);
  out << report_to_json(report);
}

EpisodeReport load_report_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open report file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return report_from_json(buffer.str());
}

std::uint64_t report_hash(const EpisodeReport& report) {
  const std::string bytes = report_to_json(report);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

namespace {

void append_number(std::ostringstream& os, double v) {
  json j = v;  // shortest round-trip float formatting, same as the reports
  os << j.dump();
}

}  // namespace

std::string suite_csv(std::span<const EpisodeReport> reports) {
  std::ostringstream os;
  os << "scenario_id,ds,epdms_mean,rc,nc,dac,tlc,ddc,lk,ttc,hc,ec,frames,seed\n";
  for (const EpisodeReport& r : reports) {
    os << r.scenario_id << ",";
    append_number(os, r.ds);
    os << ",";
    append_number(os, r.epdms_mean);
    os << ",";
    append_number(os, r.rc);
    for (const double v : {r.means.nc, r.means.dac, r.means.tlc, r.means.ddc, r.means.lk,
                           r.means.ttc, r.means.hc, r.means.ec}) {
      os << ",";
      append_number(os, 100.0 * v);
    }
    os << "," << r.frames.size() << "," << r.seed << "\n";
  }
  return os.str();
}

std::string frames_csv(const EpisodeReport& report) {
  std::ostringstream os;
  os << "step,nc,dac,tlc,ddc,lk,ttc,hc,ec,ep,epdms\n";
  for (std::size_t i = 0; i < report.frames.size(); ++i) {
    const FrameScore& f = report.frames[i];
    os << i << "," << (f.nc ? 1 : 0) << "," << (f.dac ? 1 : 0) << "," << (f.tlc ? 1 : 0) << ","
       << (f.ddc ? 1 : 0) << ",";
    append_number(os, f.lk);
    os << ",";
    append_number(os, f.ttc);
    os << ",";
    append_number(os, f.hc);
    os << ",";
    append_number(os, f.ec);
    os << ",";
    if (f.ep.has_value()) {
      append_number(os, *f.ep);
    } else {
      os << "";
    }
    os << ",";
    append_number(os, f.epdms);
    os << "\n";
  }
  return os.str();
}

}  // namespace bridgesim
