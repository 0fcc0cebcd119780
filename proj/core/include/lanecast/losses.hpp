#pragma once

#include <vector>

#include "lanecast/decoder.hpp"
#include "lanecast/ops.hpp"
#include "lanecast/tensor.hpp"

namespace lanecast {

struct LossConfig {
  double margin = 0.2;     // probability gap the best mode must keep
  double w_margin = 1.0;
  double w_traj = 1.0;
  double w_smooth = 1.0;
  double w_lane = 1.0;
  double w_agent = 1.0;
};

struct LossTargets {
  Tensor future_deltas;        // [A, t_fut*2] ground-truth per-step displacements
  std::vector<int> maneuvers;  // per agent, class index
  Tensor lane_hits;            // [A, Nl] 0/1 occupancy; empty when lanes are not scored
};

struct LossBreakdown {
  Tensor margin;    // mode separation
  Tensor traj_ce;   // confidence of the leading mode
  Tensor smooth;    // displacement regression
  Tensor lane_ce;   // lane occupancy
  Tensor agent_ce;  // maneuver classification
  Tensor total;
};

// Highest-probability mode per agent, ties to the lower index.
std::vector<int64_t> argmax_modes(const Tensor& traj_probs);

// All terms stay on the tape, so total.backward() reaches every head. The
// leading mode is picked from the predicted probabilities and treated as a
// constant choice. lane_weights may be empty; its term is then zero.
LossBreakdown compute_losses(Tape& tape, const DecoderOutput& out, const Tensor& lane_weights,
                             const LossTargets& targets, const LossConfig& cfg = {});

}  // namespace lanecast
