#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lanecast/scenario.hpp"
#include "lanecast/tensor.hpp"

namespace lanecast {

struct TrajectoryMetrics {
  double min_ade_k1 = 0.0;  // error of the highest-probability mode
  double min_fde_k1 = 0.0;
  double min_ade_k = 0.0;   // best mode per agent
  double min_fde_k = 0.0;
  int64_t n_agents = 0;     // agents actually scored
  int64_t n_skipped = 0;    // agents without a future to score against
};

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int64_t support = 0;
};

struct ManeuverMetrics {
  std::array<ClassScore, 6> per_class;
  ClassScore yield;  // stop / nudge / decelerate pooled into one positive class
  double accuracy = 0.0;
  int64_t n_agents = 0;
};

struct LaneMetrics {
  double cell_accuracy = 0.0;  // thresholded weight vs occupancy, per (agent, lane) cell
  double case_recall = 0.0;    // agents with a true lane where at least one was found
  int64_t n_cells = 0;
  int64_t n_cases = 0;
};

// Positions of one predicted mode: anchor + running sum of the step deltas.
std::vector<std::array<double, 2>> unroll_deltas(const double* deltas, int64_t t_fut, double ax,
                                                 double ay);

bool is_yield(Maneuver m);

// Accumulates per-scenario predictions; aggregate getters can be called at
// any point. Trajectories are scored in whatever frame the deltas, anchors,
// and futures share.
class MetricsAccumulator {
 public:
  // deltas [A*K, t_fut*2] grouped per agent, traj_probs [A, K]; futures may
  // be empty for an agent, which skips (and counts) it
  void add_trajectories(const Tensor& deltas, const Tensor& traj_probs,
                        const std::vector<std::array<double, 2>>& anchors,
                        const std::vector<std::vector<std::array<double, 2>>>& futures);
  void add_maneuvers(const Tensor& maneuver_probs, const std::vector<Maneuver>& labels);
  // lane_weights [A, Nl] against 0/1 occupancy rows; threshold at 0.5
  void add_lanes(const Tensor& lane_weights, const Tensor& lane_hits);

  TrajectoryMetrics trajectory() const;
  ManeuverMetrics maneuver() const;
  LaneMetrics lane() const;

 private:
  double sum_ade_k1_ = 0.0, sum_fde_k1_ = 0.0, sum_ade_k_ = 0.0, sum_fde_k_ = 0.0;
  int64_t traj_agents_ = 0, traj_skipped_ = 0;
  std::array<std::array<int64_t, 6>, 6> confusion_{};  // [true][predicted]
  int64_t lane_cells_ = 0, lane_cells_correct_ = 0;
  int64_t lane_cases_ = 0, lane_cases_hit_ = 0;
};

}  // namespace lanecast
