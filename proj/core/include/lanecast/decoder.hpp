#pragma once

#include <string>
#include <vector>

#include "lanecast/fusion.hpp"
#include "lanecast/ops.hpp"
#include "lanecast/params.hpp"
#include "lanecast/rng.hpp"
#include "lanecast/tensor.hpp"

namespace lanecast {

constexpr int64_t kManeuverCount = 6;

struct DecoderConfig {
  int64_t d_model = 64;
  int64_t k_modes = 6;        // trajectory hypotheses per agent
  int64_t t_fut = 30;         // predicted steps
  bool maneuver_head = true;  // when off, no head parameters and empty probabilities
};

struct DecoderOutput {
  Tensor deltas;          // [A*K, t_fut*2] per-step displacements, modes grouped by agent
  Tensor endpoints;       // [A*K, 2] summed displacement of each mode
  Tensor traj_probs;      // [A, K] softmax over each agent's modes
  Tensor maneuver_probs;  // [A, kManeuverCount]
};

// x + ffn residual stage used to widen the decoding head.
class LinearResBlock {
 public:
  LinearResBlock(ParamRegistry& reg, const std::string& prefix, Rng& rng, int64_t d_model);
  Tensor forward(Tape& tape, const Tensor& x) const;

 private:
  Tensor w1_, b1_, w2_, b2_, g_, c_;
};

// Decodes fused agent features into K delta trajectories per agent plus the
// per-mode probabilities and the maneuver distribution. The mode
// probabilities come from a second feature-selection pass whose context is
// each mode's own prediction: every agent pairs with exactly its K modes (no
// interest selector), the displacement input is the negated mode endpoint,
// and the gated pair features feed the probability head.
class Decoder {
 public:
  Decoder(ParamRegistry& reg, const std::string& prefix, Rng& rng, DecoderConfig cfg);
  // x_fuse: [A, d]; att_lane / att_agent: [A, d] fusion attention outputs
  DecoderOutput forward(Tape& tape, const Tensor& x_fuse, const Tensor& att_lane,
                        const Tensor& att_agent) const;
  const DecoderConfig& config() const { return cfg_; }

 private:
  DecoderConfig cfg_;
  LinearResBlock res1_, res2_;
  Tensor head_w_, head_b_;  // d -> K * t_fut * 2
  Tensor ep_w_, ep_b_;      // last-step delta embed, 2 -> d
  FeatureSelectionBlock refine_;
  Tensor prob_w_, prob_b_;  // gated pair -> mode logit
  Tensor man_w_, man_b_;    // concat(att_lane, att_agent) -> maneuver logits
};

}  // namespace lanecast
