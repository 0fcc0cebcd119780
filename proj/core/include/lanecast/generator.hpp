#pragma once

#include <cstdint>
#include <vector>

#include "lanecast/rng.hpp"
#include "lanecast/scenario.hpp"

namespace lanecast {

enum class MapKind {
  kStraight = 0,
  kCurve = 1,
  kLaneChange = 2,
  kTJunction = 3,
  kCrossing = 4,
};
constexpr int kMapKinds = 5;

// Scripted ego roles. These shape the motion; the stored labels always come
// from label_maneuver afterwards, never from the script that produced them.
enum class Behavior {
  kCruise = 0,
  kFollow = 1,
  kStopYield = 2,
  kDecelYield = 3,
  kNudge = 4,
};

// Thresholds for the rule labeler. An agent gets the first class in priority
// order S, N, D, F whose rule fires; with none of those, U when fewer than
// min_frames history frames were perceived, otherwise I.
struct ManeuverRules {
  double dt = 0.1;                   // seconds per frame
  double stop_speed = 0.5;           // S: future mean speed below this (m/s)
  double heading_change_deg = 15.0;  // N: max future heading change above this
  double lateral_offset = 1.75;      // N: max offset from the starting lane above this (m)
  double decel_accel = -0.5;         // D: future mean acceleration below this (m/s^2)
  double follow_range = 30.0;        // F: lead within this distance ahead (m)
  double follow_lateral = 2.0;
  double follow_align_deg = 10.0;    // F: heading difference to the lead at most this
  double yield_range = 15.0;         // S/N/D precondition: lead within this at t=0 (m)
  double yield_lateral = 2.0;
  double heading_speed_min = 0.5;    // below this speed a step has no defined heading
  int min_frames = 5;                // U: fewer perceived history frames than this
};

struct GenConfig {
  int t_hst = 20;
  int t_fut = 30;
  double dt = 0.1;  // 10 Hz
  double max_accel = 4.0;
  double segment_length = 10.0;
  double overlap_threshold = 2.5;
  double lane_hit_radius = 2.0;   // lane occupancy labeling radius (m)
  double extra_agent_prob = 0.6;  // chance of a third, unscripted agent
  double ghost_share = 0.35;      // fraction of extra agents that are barely perceived
  ManeuverRules rules;
  // test hooks
  int fixed_map = -1;       // pin the MapKind
  int fixed_behavior = -1;  // pin the ego Behavior
  double fixed_speed = -1.0;  // pin the cruise/follow speed
};

// One randomized map of the given kind, in canonical pose.
std::vector<LanePolyline> make_map(MapKind kind, Rng& rng);

// Rule labeler over the finished scenario. Works for any agent index.
Maneuver label_maneuver(const Scenario& s, size_t agent, const ManeuverRules& rules);

// Lane occupancy: cell v is 1 when some future position of the agent lies
// within `radius` of lane vector v.
std::vector<uint8_t> label_lanes(const Scenario& s, size_t agent, double radius);

// Full scenario: map, scripted agents, noise-free tracks, labels. Agent 0 is
// the ego. Deterministic in (seed, cfg).
Scenario generate_scenario(uint64_t seed, const GenConfig& cfg);

std::vector<Scenario> generate_batch(uint64_t seed, int count, const GenConfig& cfg);

}  // namespace lanecast
