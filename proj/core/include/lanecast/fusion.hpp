#pragma once

#include <array>
#include <string>
#include <vector>

#include "lanecast/encoder.hpp"
#include "lanecast/ops.hpp"
#include "lanecast/params.hpp"
#include "lanecast/rng.hpp"
#include "lanecast/tensor.hpp"

namespace lanecast {

// One (base row, context row) pair inside the interest radius, with the
// base-minus-context displacement in the local frame.
struct ToiPair {
  int32_t base = 0;
  int32_t ctx = 0;
  double dx = 0.0;
  double dy = 0.0;
};

// All pairs with |base_i - ctx_j| strictly inside eps_th. When base and
// context are the same set, pass exclude_same_index to drop i == j.
std::vector<ToiPair> toi_select(const std::vector<std::array<double, 2>>& base_pos,
                                const std::vector<std::array<double, 2>>& ctx_pos, double eps_th,
                                bool exclude_same_index = false);

struct FusionResult {
  Tensor fused;        // [Nb, d] block output, after the feedforward stage
  Tensor att;          // [Nb, d] pre-feedforward attention output
  Tensor gated_pairs;  // [P, d] per-pair gated features; empty when P == 0
};

// Pairwise gated fusion: each interesting (base, context) pair is combined
// with its displacement, squeezed through a sigmoid gate, and index-added
// back onto the base rows. Rows with no pair pass through the residual.
class FeatureSelectionBlock {
 public:
  FeatureSelectionBlock(ParamRegistry& reg, const std::string& prefix, Rng& rng, int64_t d_model);
  FusionResult forward(Tape& tape, const Tensor& x_base, const Tensor& x_ctx,
                       const std::vector<ToiPair>& pairs) const;
  // Same fusion with the pair displacements supplied as a live [P, 2] tensor,
  // for callers whose displacements are themselves network outputs.
  FusionResult forward(Tape& tape, const Tensor& x_base, const Tensor& x_ctx,
                       const std::vector<int64_t>& base_rows, const std::vector<int64_t>& ctx_rows,
                       const Tensor& disp) const;

 private:
  Tensor w_b_, b_b_, w_c_;      // pair mixing; the context side carries no bias
  Tensor g_bc_, c_bc_;
  Tensor w_gamma_, b_gamma_;    // gate preactivation
  Tensor w_sig_, b_sig_, w_gate_, b_gate_;
  Tensor g_g_, c_g_;
  Tensor g_att_, c_att_;
  FfnBlock ffn_;
};

// n_blocks of the same fusion applied in sequence over a fixed pair set;
// att and gated_pairs come from the last block.
class FeatureSelectionStack {
 public:
  FeatureSelectionStack(ParamRegistry& reg, const std::string& prefix, Rng& rng, int64_t d_model,
                        int64_t n_blocks);
  FusionResult forward(Tape& tape, Tensor x_base, const Tensor& x_ctx,
                       const std::vector<ToiPair>& pairs) const;

 private:
  std::vector<FeatureSelectionBlock> blocks_;
};

struct LaneAttentionResult {
  Tensor fused;    // [Na, d]
  Tensor weights;  // [Na, Nl] sigmoid scores, the lane decision probabilities
};

// Single-head scaled dot-product attention over lane features with a sigmoid
// in place of the softmax, so rows may commit to several lanes or none.
class SigmoidLaneAttention {
 public:
  SigmoidLaneAttention(ParamRegistry& reg, const std::string& prefix, Rng& rng, int64_t d_model);
  LaneAttentionResult forward(Tape& tape, const Tensor& x_agents, const Tensor& x_lanes) const;

 private:
  int64_t d_model_;
  Tensor wq_, bq_, wk_, bk_, wv_, bv_;
  Tensor g_attn_, c_attn_;
  Tensor w1_, b1_, w2_, b2_;
  Tensor g_out_, c_out_;
};

}  // namespace lanecast
