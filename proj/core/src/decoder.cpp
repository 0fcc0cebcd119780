#include "lanecast/decoder.hpp"

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

LinearResBlock::LinearResBlock(ParamRegistry& reg, const std::string& prefix, Rng& rng,
                               int64_t d) {
  w1_ = param(reg, prefix + ".w1", rng, d, {d, d});
  b1_ = param_zeros(reg, prefix + ".b1", {1, d});
  w2_ = param(reg, prefix + ".w2", rng, d, {d, d});
  b2_ = param_zeros(reg, prefix + ".b2", {1, d});
  g_ = param_ones(reg, prefix + ".norm.gain", {1, d});
  c_ = param_zeros(reg, prefix + ".norm.bias", {1, d});
}

Tensor LinearResBlock::forward(Tape& tape, const Tensor& x) const {
  const Tensor h = relu(tape, linear(tape, x, w1_, b1_));
  return relu(tape, layer_norm(tape, add(tape, x, linear(tape, h, w2_, b2_)), g_, c_));
}

Decoder::Decoder(ParamRegistry& reg, const std::string& prefix, Rng& rng, DecoderConfig cfg)
    : cfg_(cfg),
      res1_(reg, prefix + ".res1", rng, cfg.d_model),
      res2_(reg, prefix + ".res2", rng, cfg.d_model),
      refine_(reg, prefix + ".refine", rng, cfg.d_model) {
  if (cfg_.k_modes < 1 || cfg_.t_fut < 1)
    throw std::invalid_argument("decoder: need at least one mode and one future step");
  const int64_t d = cfg_.d_model;
  head_w_ = param(reg, prefix + ".head.w", rng, d, {d, cfg_.k_modes * cfg_.t_fut * 2});
  head_b_ = param_zeros(reg, prefix + ".head.b", {1, cfg_.k_modes * cfg_.t_fut * 2});
  ep_w_ = param(reg, prefix + ".endpoint.w", rng, 2, {2, d});
  ep_b_ = param_zeros(reg, prefix + ".endpoint.b", {1, d});
  prob_w_ = param(reg, prefix + ".prob.w", rng, d, {d, 1});
  prob_b_ = param_zeros(reg, prefix + ".prob.b", {1, 1});
  if (cfg_.maneuver_head) {
    man_w_ = param(reg, prefix + ".maneuver.w", rng, 2 * d, {2 * d, kManeuverCount});
    man_b_ = param_zeros(reg, prefix + ".maneuver.b", {1, kManeuverCount});
  }
}

DecoderOutput Decoder::forward(Tape& tape, const Tensor& x_fuse, const Tensor& att_lane,
                               const Tensor& att_agent) const {
  const int64_t a = x_fuse.rows(), d = cfg_.d_model, k = cfg_.k_modes, t = cfg_.t_fut;
  if (x_fuse.cols() != d)
    throw ShapeError("decoder: fused width " + std::to_string(x_fuse.cols()) + " vs " +
                     std::to_string(d));
  if (att_lane.rows() != a || att_agent.rows() != a)
    throw ShapeError("decoder: attention outputs must cover all " + std::to_string(a) + " agents");

  // trajectory head: [A, d] -> [A*K, t_fut*2], mode rows grouped per agent
  const Tensor h = res2_.forward(tape, res1_.forward(tape, x_fuse));
  const Tensor flat = linear(tape, h, head_w_, head_b_);
  const Tensor deltas = reshape(tape, flat, {a * k, t * 2});

  // each mode's total displacement and final step
  const Tensor endpoints = group_sum_rows(tape, reshape(tape, deltas, {a * k * t, 2}), t);
  const Tensor last_step = slice_cols(tape, deltas, (t - 1) * 2, 2);

  // refinement pass: agent i against its own K modes
  std::vector<int64_t> base_rows(static_cast<size_t>(a * k)), ctx_rows(static_cast<size_t>(a * k));
  for (int64_t i = 0; i < a; ++i)
    for (int64_t m = 0; m < k; ++m) {
      base_rows[static_cast<size_t>(i * k + m)] = i;
      ctx_rows[static_cast<size_t>(i * k + m)] = i * k + m;
    }
  const Tensor mode_ctx = relu(tape, linear(tape, last_step, ep_w_, ep_b_));
  const Tensor back_disp = scalar_mul(tape, endpoints, -1.0);  // mode endpoint -> agent
  const FusionResult refined =
      refine_.forward(tape, x_fuse, mode_ctx, base_rows, ctx_rows, back_disp);

  const Tensor logits = reshape(tape, linear(tape, refined.gated_pairs, prob_w_, prob_b_), {a, k});
  const Tensor traj_probs = softmax_rows(tape, logits);

  Tensor maneuver_probs;
  if (cfg_.maneuver_head) {
    const Tensor man_logits =
        linear(tape, concat_cols(tape, att_lane, att_agent), man_w_, man_b_);
    maneuver_probs = softmax_rows(tape, man_logits);
  }

  return {deltas, endpoints, traj_probs, maneuver_probs};
}

}  // namespace lanecast
