#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lanecast/scene.hpp"

namespace lanecast {

// Decision taxonomy, priority order S < N < D < F < I < U.
enum class Maneuver : uint8_t {
  kStop = 0,        // S
  kNudge = 1,       // N (nudge / lane change under a yield cause)
  kDecelerate = 2,  // D
  kFollow = 3,      // F
  kIgnore = 4,      // I
  kUnknown = 5,     // U (too few perceived frames)
};

char maneuver_letter(Maneuver m);
Maneuver maneuver_from_letter(char c);

struct Scenario {
  uint64_t seed = 0;
  std::vector<LanePolyline> map_lanes;
  double segment_length = 10.0;
  double overlap_threshold = 2.5;
  LaneGraph graph;                      // built from map_lanes
  std::vector<AgentTrack> agents;      // index 0 is the ego vehicle
  std::vector<Maneuver> maneuver_labels;
  std::vector<std::vector<uint8_t>> lane_labels;  // [agent][lane vector] 0/1
};

struct NoiseSpec {
  enum class Mode { kLoss, kGaussian };
  Mode mode = Mode::kLoss;
  double probability = 0.0;
};

// Corrupts history frames of every agent independently with the given
// probability. Loss mode zeroes the displacement and clears the perceived
// flag; gaussian mode adds N(0, (v/100)^2) per displacement component, where
// v is that frame's speed in m/s. Labels, futures and the map are untouched.
Scenario inject_noise(const Scenario& s, const NoiseSpec& spec, uint64_t seed);

// --- map fixture files (one map per file, versioned) ---
void save_map_fixture(const std::string& path, const std::vector<LanePolyline>& lanes,
                      double segment_length, double overlap_threshold);
void load_map_fixture(const std::string& path, std::vector<LanePolyline>& lanes,
                      double& segment_length, double& overlap_threshold);

// --- scenario files (versioned header line + one record per line) ---
void save_scenarios(const std::string& path, const std::vector<Scenario>& scenarios);

// Streaming reader; one record held in memory at a time.
class ScenarioReader {
 public:
  explicit ScenarioReader(const std::string& path);
  ~ScenarioReader();
  ScenarioReader(const ScenarioReader&) = delete;
  ScenarioReader& operator=(const ScenarioReader&) = delete;

  // Fills `out` with the next record; false at end of file. Throws
  // std::runtime_error with the 1-based line number on malformed input.
  bool next(Scenario& out);
  size_t line() const { return line_; }

 private:
  struct Impl;
  Impl* impl_;
  size_t line_ = 0;
};

std::vector<Scenario> load_scenarios(const std::string& path);

}  // namespace lanecast
