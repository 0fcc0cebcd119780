#include "lanecast/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
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

Tensor positional_encoding(int64_t t_hst, int64_t d_model) {
  Tensor pe({t_hst, d_model});
  double* p = pe.data();
  const double base = 2.0 * static_cast<double>(t_hst);
  for (int64_t pos = 0; pos < t_hst; ++pos) {
    for (int64_t j = 0; j < d_model; ++j) {
      const int64_t i = j / 2;
      const double freq = std::pow(base, 2.0 * static_cast<double>(i) / d_model);
      const double angle = static_cast<double>(pos) / freq;
      p[pos * d_model + j] = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

std::vector<double> m_scores(const Tensor& scores) {
  const int64_t m = scores.rows(), n = scores.cols();
  std::vector<double> out(static_cast<size_t>(m));
  const double* p = scores.data();
  for (int64_t i = 0; i < m; ++i) {
    double mx = p[i * n], sum = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      mx = std::max(mx, p[i * n + j]);
      sum += p[i * n + j];
    }
    out[static_cast<size_t>(i)] = mx - sum / static_cast<double>(n);
  }
  return out;
}

double kl_from_uniform(const std::vector<double>& s) {
  if (s.empty()) throw std::invalid_argument("kl_from_uniform: empty score row");
  const double mx = *std::max_element(s.begin(), s.end());
  double lse = 0.0, mean = 0.0;
  for (double v : s) {
    lse += std::exp(v - mx);
    mean += v;
  }
  lse = mx + std::log(lse);
  mean /= static_cast<double>(s.size());
  return lse - mean - std::log(static_cast<double>(s.size()));
}

double entropy(const std::vector<double>& probs) {
  if (probs.empty()) throw std::invalid_argument("entropy: empty distribution");
  double h = 0.0;
  for (double q : probs) {
    if (q < 0.0) throw std::invalid_argument("entropy: negative probability");
    if (q > 0.0) h -= q * std::log(q);
  }
  return h;
}

std::vector<int64_t> select_top_queries(const std::vector<double>& m, int64_t n_sel) {
  const int64_t n = static_cast<int64_t>(m.size());
  n_sel = std::max<int64_t>(1, std::min(n_sel, n));
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    if (m[static_cast<size_t>(a)] != m[static_cast<size_t>(b)])
      return m[static_cast<size_t>(a)] > m[static_cast<size_t>(b)];
    return a < b;
  });
  order.resize(static_cast<size_t>(n_sel));
  std::sort(order.begin(), order.end());
  return order;
}

// ---------------------------------------------------------------------------
// attention

SparseAttention::SparseAttention(ParamRegistry& reg, const std::string& prefix, Rng& rng,
                                 AttentionConfig cfg)
    : cfg_(cfg) {
  if (cfg_.d_model % cfg_.n_heads != 0)
    throw std::invalid_argument("attention: width " + std::to_string(cfg_.d_model) +
                                " not divisible by " + std::to_string(cfg_.n_heads) + " heads");
  if (cfg_.select_ratio <= 0.0 || cfg_.select_ratio > 1.0)
    throw std::invalid_argument("attention: select ratio outside (0, 1]");
  const int64_t d = cfg_.d_model;
  wq_ = param(reg, prefix + ".wq", rng, d, {d, d});
  bq_ = param_zeros(reg, prefix + ".bq", {1, d});
  wk_ = param(reg, prefix + ".wk", rng, d, {d, d});
  bk_ = param_zeros(reg, prefix + ".bk", {1, d});
  wv_ = param(reg, prefix + ".wv", rng, d, {d, d});
  bv_ = param_zeros(reg, prefix + ".bv", {1, d});
  wo_ = param(reg, prefix + ".wo", rng, d, {d, d});  // no bias: unselected rows stay zero
}

Tensor SparseAttention::forward(Tape& tape, const Tensor& x_q, const Tensor& x_kv,
                                AttentionTrace* trace) const {
  const int64_t d = cfg_.d_model, h = cfg_.n_heads, dh = d / h;
  if (x_q.cols() != d || x_kv.cols() != d)
    throw ShapeError("attention: input width " + std::to_string(x_q.cols()) + " vs model width " +
                     std::to_string(d));
  const int64_t lq = x_q.rows();

  const Tensor q = linear(tape, x_q, wq_, bq_);
  const Tensor k = linear(tape, x_kv, wk_, bk_);
  const Tensor v = linear(tape, x_kv, wv_, bv_);

  if (trace) {
    trace->selected.clear();
    trace->weights.clear();
    trace->measurement.clear();
  }

  std::vector<Tensor> heads;
  heads.reserve(static_cast<size_t>(h));
  for (int64_t hi = 0; hi < h; ++hi) {
    const Tensor qh = slice_cols(tape, q, hi * dh, dh);
    const Tensor kh = slice_cols(tape, k, hi * dh, dh);
    const Tensor vh = slice_cols(tape, v, hi * dh, dh);
    const Tensor scores = scalar_mul(tape, matmul_nt(tape, qh, kh), 1.0 / std::sqrt(dh));

    Tensor ctx;  // [lq, dh]
    if (cfg_.vanilla) {
      const Tensor attn = softmax_rows(tape, scores);
      ctx = matmul(tape, attn, vh);
      if (trace) {
        std::vector<int64_t> all(static_cast<size_t>(lq));
        std::iota(all.begin(), all.end(), 0);
        trace->selected.push_back(std::move(all));
        trace->weights.push_back(attn);
        trace->measurement.push_back(m_scores(scores));
      }
    } else {
      const std::vector<double> m = m_scores(scores);
      const int64_t n_sel = static_cast<int64_t>(
          std::ceil(cfg_.select_ratio * static_cast<double>(lq)));
      const std::vector<int64_t> sel = select_top_queries(m, n_sel);
      const Tensor picked = index_select_rows(tape, scores, sel);
      const Tensor attn = softmax_rows(tape, picked);
      const Tensor picked_ctx = matmul(tape, attn, vh);
      ctx = index_add_rows(tape, Tensor({lq, dh}), sel, picked_ctx);
      if (trace) {
        trace->selected.push_back(sel);
        trace->weights.push_back(attn);
        trace->measurement.push_back(m);
      }
    }
    heads.push_back(ctx);
  }

  Tensor merged = heads[0];
  for (size_t i = 1; i < heads.size(); ++i) merged = concat_cols(tape, merged, heads[i]);
  return matmul(tape, merged, wo_);
}

// ---------------------------------------------------------------------------
// blocks

TransformerBlock::TransformerBlock(ParamRegistry& reg, const std::string& prefix, Rng& rng,
                                   AttentionConfig cfg)
    : attn_(reg, prefix + ".attn", rng, cfg) {
  const int64_t d = cfg.d_model, inner = 4 * d;
  w1_ = param(reg, prefix + ".ffn.w1", rng, d, {d, inner});
  b1_ = param_zeros(reg, prefix + ".ffn.b1", {1, inner});
  w2_ = param(reg, prefix + ".ffn.w2", rng, inner, {inner, d});
  b2_ = param_zeros(reg, prefix + ".ffn.b2", {1, d});
  g_attn_ = param_ones(reg, prefix + ".norm1.gain", {1, d});
  c_attn_ = param_zeros(reg, prefix + ".norm1.bias", {1, d});
  g_out_ = param_ones(reg, prefix + ".norm2.gain", {1, d});
  c_out_ = param_zeros(reg, prefix + ".norm2.bias", {1, d});
}

Tensor TransformerBlock::forward(Tape& tape, const Tensor& x_q, const Tensor& x_kv,
                                 AttentionTrace* trace) const {
  const Tensor a = attn_.forward(tape, x_q, x_kv, trace);
  const Tensor x_s = layer_norm(tape, add(tape, x_q, a), g_attn_, c_attn_);
  const Tensor f =
      linear(tape, relu(tape, linear(tape, x_s, w1_, b1_)), w2_, b2_);
  return layer_norm(tape, add(tape, x_q, f), g_out_, c_out_);
}

FfnBlock::FfnBlock(ParamRegistry& reg, const std::string& prefix, Rng& rng, int64_t d_model) {
  const int64_t inner = 4 * d_model;
  w1_ = param(reg, prefix + ".w1", rng, d_model, {d_model, inner});
  b1_ = param_zeros(reg, prefix + ".b1", {1, inner});
  w2_ = param(reg, prefix + ".w2", rng, inner, {inner, d_model});
  b2_ = param_zeros(reg, prefix + ".b2", {1, d_model});
  g_ = param_ones(reg, prefix + ".norm.gain", {1, d_model});
  c_ = param_zeros(reg, prefix + ".norm.bias", {1, d_model});
}

Tensor FfnBlock::forward(Tape& tape, const Tensor& x) const {
  const Tensor f = linear(tape, relu(tape, linear(tape, x, w1_, b1_)), w2_, b2_);
  return layer_norm(tape, add(tape, x, f), g_, c_);
}

ConvPool::ConvPool(ParamRegistry& reg, const std::string& prefix, Rng& rng, int64_t d_model) {
  w_ = param(reg, prefix + ".conv.w", rng, d_model * 3, {d_model, d_model * 3});
  b_ = param_zeros(reg, prefix + ".conv.b", {1, d_model});
}

Tensor ConvPool::forward(Tape& tape, const Tensor& x) const {
  return maxpool1d_2(tape, relu(tape, conv1d_same(tape, x, w_, b_, 3)));
}

// ---------------------------------------------------------------------------
// agent history

AgentEncoder::AgentEncoder(ParamRegistry& reg, const std::string& prefix, Rng& rng, int64_t t_hst,
                           AttentionConfig cfg, int64_t n_blocks) {
  embed_w_ = param(reg, prefix + ".embed.w", rng, kAgentFeatureDim,
                   {kAgentFeatureDim, cfg.d_model});
  embed_b_ = param_zeros(reg, prefix + ".embed.b", {1, cfg.d_model});
  pe_ = positional_encoding(t_hst, cfg.d_model);
  for (int64_t i = 0; i < n_blocks; ++i) {
    const std::string stem = prefix + ".block" + std::to_string(i);
    blocks_.emplace_back(reg, stem, rng, cfg);
    pools_.emplace_back(reg, stem + ".pool", rng, cfg.d_model);
  }
}

Tensor AgentEncoder::forward(Tape& tape, const Tensor& steps, AttentionTrace* trace) const {
  if (steps.cols() != kAgentFeatureDim)
    throw ShapeError("agent encoder: expected " + std::to_string(kAgentFeatureDim) +
                     " step features, got " + std::to_string(steps.cols()));
  if (steps.rows() != pe_.rows())
    throw ShapeError("agent encoder: history length " + std::to_string(steps.rows()) +
                     " vs table " + std::to_string(pe_.rows()));
  Tensor h = add(tape, linear(tape, steps, embed_w_, embed_b_), pe_);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    h = blocks_[i].forward_self(tape, h, trace);
    h = pools_[i].forward(tape, h);
  }
  return reduce_max_rows(tape, h);
}

// ---------------------------------------------------------------------------
// lanes

LaneEmbed::LaneEmbed(ParamRegistry& reg, const std::string& prefix, Rng& rng, int64_t d_model) {
  w_ = param(reg, prefix + ".w", rng, kLaneFeatureDim, {kLaneFeatureDim, d_model});
  b_ = param_zeros(reg, prefix + ".b", {1, d_model});
  g_ = param_ones(reg, prefix + ".norm.gain", {1, d_model});
  c_ = param_zeros(reg, prefix + ".norm.bias", {1, d_model});
}

Tensor LaneEmbed::forward(Tape& tape, const Tensor& lane_feats) const {
  if (lane_feats.cols() != kLaneFeatureDim)
    throw ShapeError("lane embed: expected " + std::to_string(kLaneFeatureDim) +
                     " features, got " + std::to_string(lane_feats.cols()));
  return relu(tape, layer_norm(tape, linear(tape, lane_feats, w_, b_), g_, c_));
}

LaneConvBlock::LaneConvBlock(ParamRegistry& reg, const std::string& prefix, Rng& rng,
                             int64_t d_model, std::vector<int> dilations)
    : dilations_(std::move(dilations)) {
  w_self_ = param(reg, prefix + ".w_self", rng, d_model, {d_model, d_model});
  w_right_ = param(reg, prefix + ".w_right", rng, d_model, {d_model, d_model});
  w_left_ = param(reg, prefix + ".w_left", rng, d_model, {d_model, d_model});
  w_merge_ = param(reg, prefix + ".w_merge", rng, d_model, {d_model, d_model});
  w_overlap_ = param(reg, prefix + ".w_overlap", rng, d_model, {d_model, d_model});
  for (int c : dilations_) {
    if (c < 1 || c > kMaxHops)
      throw std::invalid_argument("lane conv: dilation " + std::to_string(c) + " outside [1, " +
                                  std::to_string(kMaxHops) + "]");
    w_pred_.push_back(
        param(reg, prefix + ".w_pred" + std::to_string(c), rng, d_model, {d_model, d_model}));
    w_succ_.push_back(
        param(reg, prefix + ".w_succ" + std::to_string(c), rng, d_model, {d_model, d_model}));
  }
  g_ = param_ones(reg, prefix + ".norm.gain", {1, d_model});
  c_ = param_zeros(reg, prefix + ".norm.bias", {1, d_model});
}

Tensor LaneConvBlock::forward(Tape& tape, const Tensor& x, const LaneGraph& graph) const {
  if (x.rows() != graph.size())
    throw ShapeError("lane conv: " + std::to_string(x.rows()) + " feature rows vs " +
                     std::to_string(graph.size()) + " lane vectors");
  const size_t nv = static_cast<size_t>(graph.size());

  auto unary_adj = [&](const std::vector<int32_t>& target) {
    std::vector<std::vector<int32_t>> adj(nv);
    for (size_t v = 0; v < nv; ++v)
      if (target[v] >= 0) adj[v].push_back(target[v]);
    return adj;
  };

  Tensor y = matmul(tape, x, w_self_);
  y = add(tape, y, matmul(tape, gather_sum_rows(tape, x, unary_adj(graph.right)), w_right_));
  y = add(tape, y, matmul(tape, gather_sum_rows(tape, x, unary_adj(graph.left)), w_left_));
  y = add(tape, y, matmul(tape, gather_sum_rows(tape, x, graph.merge), w_merge_));
  y = add(tape, y, matmul(tape, gather_sum_rows(tape, x, graph.overlap), w_overlap_));
  for (size_t ci = 0; ci < dilations_.size(); ++ci) {
    const size_t k = static_cast<size_t>(dilations_[ci]) - 1;
    y = add(tape, y, matmul(tape, gather_sum_rows(tape, x, graph.pred[k]), w_pred_[ci]));
    y = add(tape, y, matmul(tape, gather_sum_rows(tape, x, graph.succ[k]), w_succ_[ci]));
  }
  return relu(tape, layer_norm(tape, y, g_, c_));
}

LaneConvStack::LaneConvStack(ParamRegistry& reg, const std::string& prefix, Rng& rng,
                             int64_t d_model, int64_t n_blocks, std::vector<int> dilations) {
  for (int64_t i = 0; i < n_blocks; ++i)
    blocks_.emplace_back(reg, prefix + ".block" + std::to_string(i), rng, d_model, dilations);
}

Tensor LaneConvStack::forward(Tape& tape, Tensor x, const LaneGraph& graph) const {
  for (const LaneConvBlock& block : blocks_) x = block.forward(tape, x, graph);
  return x;
}

}  // namespace lanecast
