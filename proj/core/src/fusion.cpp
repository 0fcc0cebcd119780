#include "lanecast/fusion.hpp"

#include <cmath>
#include <stdexcept>

namespace lanecast {

namespace {

Tensor param(ParamRegistry& reg, const std::string& name, Rng& rng, int64_t fan_in,
             std::vector<int64_t> shape) {
  Tensor t = kaiming_uniform(rng, fan_in, std::move(shape));
  reg.add(name, t);
  return t;
}

Tensor param_zeros(ParamRegistry& reg, const std::string& name, std::vector<int64_t> shape) {
  Tensor t(std::move(shape));
  reg.add(name, t);
  return t;
}

Tensor param_ones(ParamRegistry& reg, const std::string& name, std::vector<int64_t> shape) {
  Tensor t = Tensor::full(std::move(shape), 1.0);
  reg.add(name, t);
  return t;
}

}  // namespace

std::vector<ToiPair> toi_select(const std::vector<std::array<double, 2>>& base_pos,
                                const std::vector<std::array<double, 2>>& ctx_pos, double eps_th,
                                bool exclude_same_index) {
  if (eps_th <= 0.0) throw std::invalid_argument("toi_select: interest radius must be positive");
  std::vector<ToiPair> pairs;
  for (size_t i = 0; i < base_pos.size(); ++i) {
    for (size_t j = 0; j < ctx_pos.size(); ++j) {
      if (exclude_same_index && i == j) continue;
      const double dx = base_pos[i][0] - ctx_pos[j][0];
      const double dy = base_pos[i][1] - ctx_pos[j][1];
      if (std::hypot(dx, dy) < eps_th)
        pairs.push_back({static_cast<int32_t>(i), static_cast<int32_t>(j), dx, dy});
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------

FeatureSelectionBlock::FeatureSelectionBlock(ParamRegistry& reg, const std::string& prefix,
                                             Rng& rng, int64_t d)
    : ffn_(reg, prefix + ".ffn", rng, d) {
  w_b_ = param(reg, prefix + ".w_b", rng, d, {d, d});
  b_b_ = param_zeros(reg, prefix + ".b_b", {1, d});
  w_c_ = param(reg, prefix + ".w_c", rng, d + 2, {d + 2, d});
  g_bc_ = param_ones(reg, prefix + ".norm_bc.gain", {1, d});
  c_bc_ = param_zeros(reg, prefix + ".norm_bc.bias", {1, d});
  w_gamma_ = param(reg, prefix + ".w_gamma", rng, d, {d, d});
  b_gamma_ = param_zeros(reg, prefix + ".b_gamma", {1, d});
  w_sig_ = param(reg, prefix + ".w_sig", rng, d, {d, d});
  b_sig_ = param_zeros(reg, prefix + ".b_sig", {1, d});
  w_gate_ = param(reg, prefix + ".w_gate", rng, d, {d, d});
  b_gate_ = param_zeros(reg, prefix + ".b_gate", {1, d});
  g_g_ = param_ones(reg, prefix + ".norm_g.gain", {1, d});
  c_g_ = param_zeros(reg, prefix + ".norm_g.bias", {1, d});
  g_att_ = param_ones(reg, prefix + ".norm_att.gain", {1, d});
  c_att_ = param_zeros(reg, prefix + ".norm_att.bias", {1, d});
}

FusionResult FeatureSelectionBlock::forward(Tape& tape, const Tensor& x_base, const Tensor& x_ctx,
                                            const std::vector<ToiPair>& pairs) const {
  std::vector<int64_t> base_rows, ctx_rows;
  base_rows.reserve(pairs.size());
  ctx_rows.reserve(pairs.size());
  Tensor disp({static_cast<int64_t>(pairs.size()), 2});
  for (size_t p = 0; p < pairs.size(); ++p) {
    base_rows.push_back(pairs[p].base);
    ctx_rows.push_back(pairs[p].ctx);
    disp.data()[2 * p] = pairs[p].dx;
    disp.data()[2 * p + 1] = pairs[p].dy;
  }
  return forward(tape, x_base, x_ctx, base_rows, ctx_rows, disp);
}

FusionResult FeatureSelectionBlock::forward(Tape& tape, const Tensor& x_base, const Tensor& x_ctx,
                                            const std::vector<int64_t>& base_rows,
                                            const std::vector<int64_t>& ctx_rows,
                                            const Tensor& disp) const {
  const int64_t d = x_base.cols();
  if (x_ctx.cols() != d)
    throw ShapeError("feature selection: base width " + std::to_string(d) + " vs context width " +
                     std::to_string(x_ctx.cols()));
  if (base_rows.size() != ctx_rows.size() ||
      disp.rows() != static_cast<int64_t>(base_rows.size()) || (disp.numel() && disp.cols() != 2))
    throw ShapeError("feature selection: " + std::to_string(base_rows.size()) + " base rows, " +
                     std::to_string(ctx_rows.size()) + " context rows, displacement " +
                     std::to_string(disp.rows()) + "x" + std::to_string(disp.numel() ? disp.cols() : 0));

  if (base_rows.empty()) {
    const Tensor att = layer_norm(tape, x_base, g_att_, c_att_);
    return {ffn_.forward(tape, att), att, Tensor()};
  }

  for (size_t p = 0; p < base_rows.size(); ++p) {
    if (base_rows[p] < 0 || base_rows[p] >= x_base.rows() || ctx_rows[p] < 0 ||
        ctx_rows[p] >= x_ctx.rows())
      throw ShapeError("feature selection: pair (" + std::to_string(base_rows[p]) + ", " +
                       std::to_string(ctx_rows[p]) + ") outside the feature rows");
  }

  const Tensor picked_base = index_select_rows(tape, x_base, base_rows);
  const Tensor picked_ctx = index_select_rows(tape, x_ctx, ctx_rows);
  const Tensor ctx_disp = concat_cols(tape, picked_ctx, disp);

  const Tensor pre =
      add(tape, linear(tape, picked_base, w_b_, b_b_), matmul(tape, ctx_disp, w_c_));
  const Tensor x_bc = elu(tape, layer_norm(tape, pre, g_bc_, c_bc_));

  const Tensor gamma = linear(tape, x_bc, w_gamma_, b_gamma_);
  const Tensor gate = mul(tape, sigmoid(tape, linear(tape, gamma, w_sig_, b_sig_)),
                          linear(tape, gamma, w_gate_, b_gate_));
  const Tensor gated = relu(tape, layer_norm(tape, add(tape, x_bc, gate), g_g_, c_g_));

  const Tensor att =
      layer_norm(tape, index_add_rows(tape, x_base, base_rows, gated), g_att_, c_att_);
  return {ffn_.forward(tape, att), att, gated};
}

FeatureSelectionStack::FeatureSelectionStack(ParamRegistry& reg, const std::string& prefix,
                                             Rng& rng, int64_t d_model, int64_t n_blocks) {
  for (int64_t i = 0; i < n_blocks; ++i)
    blocks_.emplace_back(reg, prefix + ".block" + std::to_string(i), rng, d_model);
}

FusionResult FeatureSelectionStack::forward(Tape& tape, Tensor x_base, const Tensor& x_ctx,
                                            const std::vector<ToiPair>& pairs) const {
  FusionResult result{x_base, x_base, Tensor()};
  for (const FeatureSelectionBlock& block : blocks_) {
    result = block.forward(tape, x_base, x_ctx, pairs);
    x_base = result.fused;
  }
  return result;
}

// ---------------------------------------------------------------------------

SigmoidLaneAttention::SigmoidLaneAttention(ParamRegistry& reg, const std::string& prefix, Rng& rng,
                                           int64_t d)
    : d_model_(d) {
  wq_ = param(reg, prefix + ".wq", rng, d, {d, d});
  bq_ = param_zeros(reg, prefix + ".bq", {1, d});
  wk_ = param(reg, prefix + ".wk", rng, d, {d, d});
  bk_ = param_zeros(reg, prefix + ".bk", {1, d});
  wv_ = param(reg, prefix + ".wv", rng, d, {d, d});
  bv_ = param_zeros(reg, prefix + ".bv", {1, d});
  g_attn_ = param_ones(reg, prefix + ".norm1.gain", {1, d});
  c_attn_ = param_zeros(reg, prefix + ".norm1.bias", {1, d});
  const int64_t inner = 4 * d;
  w1_ = param(reg, prefix + ".ffn.w1", rng, d, {d, inner});
  b1_ = param_zeros(reg, prefix + ".ffn.b1", {1, inner});
  w2_ = param(reg, prefix + ".ffn.w2", rng, inner, {inner, d});
  b2_ = param_zeros(reg, prefix + ".ffn.b2", {1, d});
  g_out_ = param_ones(reg, prefix + ".norm2.gain", {1, d});
  c_out_ = param_zeros(reg, prefix + ".norm2.bias", {1, d});
}

LaneAttentionResult SigmoidLaneAttention::forward(Tape& tape, const Tensor& x_agents,
                                                  const Tensor& x_lanes) const {
  if (x_agents.cols() != d_model_)
    throw ShapeError("lane attention: agent width " + std::to_string(x_agents.cols()) + " vs " +
                     std::to_string(d_model_));
  if (x_lanes.numel() == 0)  // no lanes: nothing to attend to, nothing to decide
    return {x_agents, Tensor()};
  if (x_lanes.cols() != d_model_)
    throw ShapeError("lane attention: lane width " + std::to_string(x_lanes.cols()) + " vs " +
                     std::to_string(d_model_));

  const Tensor q = linear(tape, x_agents, wq_, bq_);
  const Tensor k = linear(tape, x_lanes, wk_, bk_);
  const Tensor v = linear(tape, x_lanes, wv_, bv_);
  const Tensor weights =
      sigmoid(tape, scalar_mul(tape, matmul_nt(tape, q, k), 1.0 / std::sqrt(d_model_)));
  const Tensor ctx = matmul(tape, weights, v);

  const Tensor s = layer_norm(tape, add(tape, x_agents, ctx), g_attn_, c_attn_);
  const Tensor f = linear(tape, relu(tape, linear(tape, s, w1_, b1_)), w2_, b2_);
  const Tensor fused = layer_norm(tape, add(tape, x_agents, f), g_out_, c_out_);
  return {fused, weights};
}

}  // namespace lanecast
