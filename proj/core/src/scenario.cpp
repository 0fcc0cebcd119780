#include "lanecast/scenario.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "lanecast/rng.hpp"

namespace lanecast {

using nlohmann::json;

char maneuver_letter(Maneuver m) {
  switch (m) {
    case Maneuver::kStop: return 'S';
    case Maneuver::kNudge: return 'N';
    case Maneuver::kDecelerate: return 'D';
    case Maneuver::kFollow: return 'F';
    case Maneuver::kIgnore: return 'I';
    case Maneuver::kUnknown: return 'U';
  }
  throw std::invalid_argument("maneuver_letter: bad enum value");
}

Maneuver maneuver_from_letter(char c) {
  switch (c) {
    case 'S': return Maneuver::kStop;
    case 'N': return Maneuver::kNudge;
    case 'D': return Maneuver::kDecelerate;
    case 'F': return Maneuver::kFollow;
    case 'I': return Maneuver::kIgnore;
    case 'U': return Maneuver::kUnknown;
  }
  throw std::invalid_argument(std::string("maneuver_from_letter: '") + c + "'");
}

Scenario inject_noise(const Scenario& s, const NoiseSpec& spec, uint64_t seed) {
  if (spec.probability < 0.0 || spec.probability > 1.0)
    throw std::invalid_argument("inject_noise: probability outside [0, 1]");
  Scenario out = s;
  Rng rng(seed);
  for (AgentTrack& agent : out.agents) {
    for (AgentStep& step : agent.history) {
      if (rng.uniform() >= spec.probability) continue;
      if (spec.mode == NoiseSpec::Mode::kLoss) {
        step.dx = 0.0;
        step.dy = 0.0;
        step.flag = 0;
      } else {
        const double v = std::hypot(step.dx, step.dy) * 10.0;  // 10 Hz frames
        const double sigma = v / 100.0;
        step.dx += rng.normal(0.0, sigma);
        step.dy += rng.normal(0.0, sigma);
      }
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// serialization

namespace {

const char* turn_name(TurnKind t) {
  switch (t) {
    case TurnKind::kNone: return "none";
    case TurnKind::kLeft: return "left";
    case TurnKind::kRight: return "right";
  }
  throw std::invalid_argument("turn_name: bad enum value");
}

TurnKind turn_from_name(const std::string& s) {
  if (s == "none") return TurnKind::kNone;
  if (s == "left") return TurnKind::kLeft;
  if (s == "right") return TurnKind::kRight;
  throw std::runtime_error("unknown turn kind '" + s + "'");
}

const char* class_name(AgentClass c) {
  switch (c) {
    case AgentClass::kCar: return "car";
    case AgentClass::kBicycle: return "bicycle";
    case AgentClass::kPedestrian: return "pedestrian";
  }
  throw std::invalid_argument("class_name: bad enum value");
}

AgentClass class_from_name(const std::string& s) {
  if (s == "car") return AgentClass::kCar;
  if (s == "bicycle") return AgentClass::kBicycle;
  if (s == "pedestrian") return AgentClass::kPedestrian;
  throw std::runtime_error("unknown agent class '" + s + "'");
}

json lane_to_json(const LanePolyline& lane) {
  json pts = json::array();
  for (const auto& p : lane.points) pts.push_back({p[0], p[1]});
  json j;
  j["id"] = lane.lane_id;
  j["points"] = std::move(pts);
  j["turn"] = turn_name(lane.turn);
  j["traffic_control"] = lane.traffic_control;
  j["intersection"] = lane.intersection;
  j["left"] = lane.left_id;
  j["right"] = lane.right_id;
  j["successors"] = lane.successor_ids;
  return j;
}

LanePolyline lane_from_json(const json& j) {
  LanePolyline lane;
  lane.lane_id = j.at("id").get<int64_t>();
  for (const auto& p : j.at("points"))
    lane.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  lane.turn = turn_from_name(j.at("turn").get<std::string>());
  lane.traffic_control = j.at("traffic_control").get<bool>();
  lane.intersection = j.at("intersection").get<bool>();
  lane.left_id = j.at("left").get<int64_t>();
  lane.right_id = j.at("right").get<int64_t>();
  lane.successor_ids = j.at("successors").get<std::vector<int64_t>>();
  return lane;
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["seed"] = s.seed;
  j["segment_length"] = s.segment_length;
  j["overlap_threshold"] = s.overlap_threshold;
  json lanes = json::array();
  for (const auto& lane : s.map_lanes) lanes.push_back(lane_to_json(lane));
  j["map"] = std::move(lanes);
  json agents = json::array();
  for (const AgentTrack& a : s.agents) {
    json ja;
    ja["id"] = a.agent_id;
    ja["class"] = class_name(a.cls);
    ja["anchor"] = {a.anchor_x, a.anchor_y};
    json hist = json::array();
    for (const AgentStep& st : a.history) hist.push_back({st.dx, st.dy, static_cast<int>(st.flag)});
    ja["history"] = std::move(hist);
    json fut = json::array();
    for (const auto& p : a.future) fut.push_back({p[0], p[1]});
    ja["future"] = std::move(fut);
    agents.push_back(std::move(ja));
  }
  j["agents"] = std::move(agents);
  std::string letters;
  for (Maneuver m : s.maneuver_labels) letters.push_back(maneuver_letter(m));
  j["maneuvers"] = letters;
  // lane occupancy stored as the indices of positive cells, one list per agent
  json occ = json::array();
  for (const auto& row : s.lane_labels) {
    json ones = json::array();
    for (size_t v = 0; v < row.size(); ++v)
      if (row[v]) ones.push_back(v);
    occ.push_back(std::move(ones));
  }
  j["lane_hits"] = std::move(occ);
  return j;
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  s.seed = j.at("seed").get<uint64_t>();
  s.segment_length = j.at("segment_length").get<double>();
  s.overlap_threshold = j.at("overlap_threshold").get<double>();
  for (const auto& jl : j.at("map")) s.map_lanes.push_back(lane_from_json(jl));
  s.graph = build_lane_graph(s.map_lanes, s.segment_length, s.overlap_threshold);
  for (const auto& ja : j.at("agents")) {
    AgentTrack a;
    a.agent_id = ja.at("id").get<int64_t>();
    a.cls = class_from_name(ja.at("class").get<std::string>());
    a.anchor_x = ja.at("anchor").at(0).get<double>();
    a.anchor_y = ja.at("anchor").at(1).get<double>();
    for (const auto& st : ja.at("history")) {
      AgentStep step;
      step.dx = st.at(0).get<double>();
      step.dy = st.at(1).get<double>();
      step.flag = st.at(2).get<int>() ? 1 : 0;
      a.history.push_back(step);
    }
    for (const auto& p : ja.at("future"))
      a.future.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    s.agents.push_back(std::move(a));
  }
  for (char c : j.at("maneuvers").get<std::string>())
    s.maneuver_labels.push_back(maneuver_from_letter(c));
  const size_t nv = static_cast<size_t>(s.graph.size());
  for (const auto& ones : j.at("lane_hits")) {
    std::vector<uint8_t> row(nv, 0);
    for (const auto& idx : ones) {
      const size_t v = idx.get<size_t>();
      if (v >= nv) throw std::runtime_error("lane hit index out of range");
      row[v] = 1;
    }
    s.lane_labels.push_back(std::move(row));
  }
  if (s.maneuver_labels.size() != s.agents.size())
    throw std::runtime_error("maneuver label count does not match agent count");
  if (s.lane_labels.size() != s.agents.size())
    throw std::runtime_error("lane label count does not match agent count");
  return s;
}

}  // namespace

void save_map_fixture(const std::string& path, const std::vector<LanePolyline>& lanes,
                      double segment_length, double overlap_threshold) {
  json j;
  j["format"] = "lanecast-map";
  j["version"] = 1;
  j["segment_length"] = segment_length;
  j["overlap_threshold"] = overlap_threshold;
  json jl = json::array();
  for (const auto& lane : lanes) jl.push_back(lane_to_json(lane));
  j["lanes"] = std::move(jl);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write map fixture: " + path);
  out << j.dump(2) << "\n";
}

void load_map_fixture(const std::string& path, std::vector<LanePolyline>& lanes,
                      double& segment_length, double& overlap_threshold) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open map fixture: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("map fixture " + path + ": " + e.what());
  }
  if (j.value("format", "") != "lanecast-map")
    throw std::runtime_error("map fixture " + path + ": unrecognized format");
  if (j.value("version", 0) != 1)
    throw std::runtime_error("map fixture " + path + ": unsupported version");
  lanes.clear();
  for (const auto& jl : j.at("lanes")) lanes.push_back(lane_from_json(jl));
  segment_length = j.at("segment_length").get<double>();
  overlap_threshold = j.at("overlap_threshold").get<double>();
}

void save_scenarios(const std::string& path, const std::vector<Scenario>& scenarios) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write scenario file: " + path);
  json header;
  header["format"] = "lanecast-scenarios";
  header["version"] = 1;
  out << header.dump() << "\n";
  for (const Scenario& s : scenarios) out << scenario_to_json(s).dump() << "\n";
  if (!out) throw std::runtime_error("short write on scenario file: " + path);
}

struct ScenarioReader::Impl {
  std::ifstream in;
};

ScenarioReader::ScenarioReader(const std::string& path) : impl_(new Impl) {
  impl_->in.open(path, std::ios::binary);
  if (!impl_->in) {
    delete impl_;
    throw std::runtime_error("cannot open scenario file: " + path);
  }
  std::string line;
  if (!std::getline(impl_->in, line)) {
    delete impl_;
    throw std::runtime_error("scenario file " + path + ": empty file");
  }
  line_ = 1;
  try {
    json header = json::parse(line);
    if (header.value("format", "") != "lanecast-scenarios")
      throw std::runtime_error("unrecognized format");
    if (header.value("version", 0) != 1) throw std::runtime_error("unsupported version");
  } catch (const std::exception& e) {
    delete impl_;
    throw std::runtime_error("scenario file " + path + ": line 1: " + e.what());
  }
}

ScenarioReader::~ScenarioReader() { delete impl_; }

bool ScenarioReader::next(Scenario& out) {
  std::string line;
  while (std::getline(impl_->in, line)) {
    ++line_;
    if (line.empty()) continue;
    try {
      out = scenario_from_json(json::parse(line));
      return true;
    } catch (const std::exception& e) {
      throw std::runtime_error("scenario record at line " + std::to_string(line_) + ": " +
                               e.what());
    }
  }
  return false;
}

std::vector<Scenario> load_scenarios(const std::string& path) {
  ScenarioReader reader(path);
  std::vector<Scenario> out;
  Scenario s;
  while (reader.next(s)) out.push_back(std::move(s));
  return out;
}

}  // namespace lanecast
