#pragma once

#include <string>
#include <vector>

#include "lanecast/ops.hpp"
#include "lanecast/params.hpp"
#include "lanecast/rng.hpp"
#include "lanecast/scene.hpp"
#include "lanecast/tensor.hpp"

namespace lanecast {

// Fixed sinusoid table added to the embedded history: row = timestep.
// table(pos, 2i) = sin(pos / (2*t_hst)^(2i/d)), table(pos, 2i+1) = cos(same).
Tensor positional_encoding(int64_t t_hst, int64_t d_model);

// Sparsity measurement per query row of a scaled score matrix: max - mean.
std::vector<double> m_scores(const Tensor& scores);

// Exact divergence of the uniform distribution from softmax(scores):
// logsumexp(s) - mean(s) - log(L). Always in [0, max(s) - mean(s)].
double kl_from_uniform(const std::vector<double>& scores);

// Shannon entropy of a distribution, 0 log 0 = 0; at most log(L), with
// equality only at the uniform point.
double entropy(const std::vector<double>& probs);

// Indices of the n_sel largest measurements, ties to the lower index,
// returned ascending.
std::vector<int64_t> select_top_queries(const std::vector<double>& m, int64_t n_sel);

struct AttentionConfig {
  int64_t d_model = 64;
  int64_t n_heads = 4;
  double select_ratio = 0.75;  // fraction of queries attended per head
  bool vanilla = false;        // dense path: no measurement, no selection
};

// What one attention call actually attended to, for inspection and export.
struct AttentionTrace {
  std::vector<std::vector<int64_t>> selected;  // per head, ascending query rows
  std::vector<Tensor> weights;                 // per head, [n_selected, L_k]
  std::vector<std::vector<double>> measurement;  // per head, per query M-score
};

// Multi-head attention where only the queries with the most peaked score
// rows get softmax context; the rest contribute zero and ride the residual.
class SparseAttention {
 public:
  SparseAttention(ParamRegistry& reg, const std::string& prefix, Rng& rng, AttentionConfig cfg);
  Tensor forward(Tape& tape, const Tensor& x_q, const Tensor& x_kv,
                 AttentionTrace* trace = nullptr) const;
  const AttentionConfig& config() const { return cfg_; }

 private:
  AttentionConfig cfg_;
  Tensor wq_, bq_, wk_, bk_, wv_, bv_, wo_;
};

// attention block: s = phi(x + attn(x)), out = phi(x + ffn(s)); both
// residuals run from the block input.
class TransformerBlock {
 public:
  TransformerBlock(ParamRegistry& reg, const std::string& prefix, Rng& rng, AttentionConfig cfg);
  Tensor forward(Tape& tape, const Tensor& x_q, const Tensor& x_kv,
                 AttentionTrace* trace = nullptr) const;
  Tensor forward_self(Tape& tape, const Tensor& x, AttentionTrace* trace = nullptr) const {
    return forward(tape, x, x, trace);
  }

 private:
  SparseAttention attn_;
  Tensor w1_, b1_, w2_, b2_;          // ffn, inner width 4*d
  Tensor g_attn_, c_attn_, g_out_, c_out_;  // the two phi stages
};

// Standalone phi(x + ffn(x)) stage used after the fusion attentions.
class FfnBlock {
 public:
  FfnBlock(ParamRegistry& reg, const std::string& prefix, Rng& rng, int64_t d_model);
  Tensor forward(Tape& tape, const Tensor& x) const;

 private:
  Tensor w1_, b1_, w2_, b2_, g_, c_;
};

// Conv1d(kernel 3, same) + relu + halving maxpool: [T, d] -> [ceil(T/2), d].
// No shortcut across the unit.
class ConvPool {
 public:
  ConvPool(ParamRegistry& reg, const std::string& prefix, Rng& rng, int64_t d_model);
  Tensor forward(Tape& tape, const Tensor& x) const;

 private:
  Tensor w_, b_;
};

constexpr int64_t kAgentFeatureDim = 6;  // dx, dy, perceived, class one-hot (3)
constexpr int64_t kLaneFeatureDim = 8;   // dx, dy, heading, turn one-hot (3), control, junction

// Per-agent history encoder: embed steps, add the sinusoid table, run n_blocks
// of (temporal self-attention -> conv-pool) so the time axis halves after each
// block, then a max over the remaining steps: [t_hst, 6] -> [1, d_model].
class AgentEncoder {
 public:
  AgentEncoder(ParamRegistry& reg, const std::string& prefix, Rng& rng, int64_t t_hst,
               AttentionConfig cfg, int64_t n_blocks);
  // steps: [t_hst, kAgentFeatureDim] -> [1, d_model]
  Tensor forward(Tape& tape, const Tensor& steps, AttentionTrace* trace = nullptr) const;

 private:
  Tensor embed_w_, embed_b_;
  Tensor pe_;
  std::vector<TransformerBlock> blocks_;
  std::vector<ConvPool> pools_;
};

// Lane vector embedding: linear -> phi -> relu.
class LaneEmbed {
 public:
  LaneEmbed(ParamRegistry& reg, const std::string& prefix, Rng& rng, int64_t d_model);
  Tensor forward(Tape& tape, const Tensor& lane_feats) const;  // [Nl, 8] -> [Nl, d]

 private:
  Tensor w_, b_, g_, c_;
};

// One graph-convolution block over the lane relations: a self term, one
// weight per side relation (right/left/merge/overlap) and one per dilation
// for predecessor/successor hops, no biases, then phi and relu.
class LaneConvBlock {
 public:
  LaneConvBlock(ParamRegistry& reg, const std::string& prefix, Rng& rng, int64_t d_model,
                std::vector<int> dilations);
  Tensor forward(Tape& tape, const Tensor& x, const LaneGraph& graph) const;

 private:
  std::vector<int> dilations_;
  Tensor w_self_, w_right_, w_left_, w_merge_, w_overlap_;
  std::vector<Tensor> w_pred_, w_succ_;
  Tensor g_, c_;
};

class LaneConvStack {
 public:
  LaneConvStack(ParamRegistry& reg, const std::string& prefix, Rng& rng, int64_t d_model,
                int64_t n_blocks, std::vector<int> dilations);
  Tensor forward(Tape& tape, Tensor x, const LaneGraph& graph) const;

 private:
  std::vector<LaneConvBlock> blocks_;
};

}  // namespace lanecast
