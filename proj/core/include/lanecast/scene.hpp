#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace lanecast {

enum class AgentClass : uint8_t { kCar = 0, kBicycle = 1, kPedestrian = 2 };
enum class TurnKind : uint8_t { kNone = 0, kLeft = 1, kRight = 2 };

struct AgentStep {
  double dx = 0.0;   // displacement since previous frame, meters
  double dy = 0.0;
  uint8_t flag = 1;  // 1 = perceived; 0 = missing (dx = dy = 0 by convention)
};

struct AgentTrack {
  int64_t agent_id = 0;
  AgentClass cls = AgentClass::kCar;
  std::vector<AgentStep> history;               // oldest first, last entry is t = 0
  double anchor_x = 0.0, anchor_y = 0.0;        // position at t = 0
  std::vector<std::array<double, 2>> future;    // positions t = 1..t_fut; may be empty
};

// Source description of one lane: an ordered centerline polyline plus the
// per-lane attributes and neighbor/successor declarations.
struct LanePolyline {
  int64_t lane_id = 0;
  std::vector<std::array<double, 2>> points;
  TurnKind turn = TurnKind::kNone;
  bool traffic_control = false;
  bool intersection = false;
  int64_t left_id = -1;   // lane id of declared left neighbor, -1 = none
  int64_t right_id = -1;
  std::vector<int64_t> successor_ids;
};

// One ~segment_length piece of a lane centerline.
struct LaneVector {
  int64_t lane_id = 0;  // owning polyline
  double dx = 0.0, dy = 0.0;       // end - start
  double heading = 0.0;            // atan2(dy, dx) at build time, radians
  TurnKind turn = TurnKind::kNone;
  bool traffic_control = false;
  bool intersection = false;
  double mid_x = 0.0, mid_y = 0.0;  // anchor (segment midpoint)
  double start_x = 0.0, start_y = 0.0;
  double end_x = 0.0, end_y = 0.0;
};

constexpr int kMaxHops = 6;

// Vectorized lane graph. Adjacency is stored as per-vector neighbor lists:
// pred[k-1][v] holds the exact-k-hop predecessors of v (dedup'd, sorted).
struct LaneGraph {
  std::vector<LaneVector> vectors;
  std::array<std::vector<std::vector<int32_t>>, kMaxHops> pred;
  std::array<std::vector<std::vector<int32_t>>, kMaxHops> succ;
  std::vector<int32_t> right;  // unique image or -1
  std::vector<int32_t> left;
  std::vector<std::vector<int32_t>> merge;    // symmetric, sorted
  std::vector<std::vector<int32_t>> overlap;  // symmetric, sorted; merge is a subset
  double segment_length = 10.0;
  double overlap_threshold = 2.5;

  int64_t size() const { return static_cast<int64_t>(vectors.size()); }
};

// Splits polylines into ~segment_length vectors and derives all relations.
// Throws std::invalid_argument on degenerate polylines (fewer than 2 points
// or repeated consecutive points), naming the offending lane.
LaneGraph build_lane_graph(const std::vector<LanePolyline>& lanes, double segment_length = 10.0,
                           double overlap_threshold = 2.5);

// Exact k-hop reachability pairs (v, u): u reaches v through k predecessor
// steps (or successor steps). k must lie in [1, kMaxHops].
std::vector<std::pair<int32_t, int32_t>> dilated_adjacency(const LaneGraph& graph, int k,
                                                           bool predecessors);

struct Scenario;  // defined in scenario.hpp

// Re-expresses every position/direction in the ego frame at t = 0: ego anchor
// at the origin, ego heading along +x. Heading comes from the most recent
// nonzero history displacement; if the whole history is zero the frame keeps
// heading 0 and *heading_undefined is set.
Scenario to_local_frame(const Scenario& scenario, bool* heading_undefined = nullptr);

// --- small geometry helpers shared by the graph builder and the labelers ---

double dist_point_segment(double px, double py, double ax, double ay, double bx, double by);

// Arc-length parameterization of a polyline.
class PolylineWalker {
 public:
  explicit PolylineWalker(const std::vector<std::array<double, 2>>& points);
  double total_length() const { return cum_.back(); }
  std::array<double, 2> point_at(double s) const;    // clamped to [0, total]
  std::array<double, 2> tangent_at(double s) const;  // unit tangent

 private:
  std::vector<std::array<double, 2>> pts_;
  std::vector<double> cum_;
};

}  // namespace lanecast
