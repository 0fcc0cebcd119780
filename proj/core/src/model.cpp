#include "lanecast/model.hpp"

#include <limits>
#include <stdexcept>

namespace lanecast {

SceneInputs featurize(const Scenario& local, int64_t t_hst, int64_t t_fut) {
  const int64_t a = static_cast<int64_t>(local.agents.size());
  if (a == 0) throw std::invalid_argument("featurize: scenario has no agents");
  if (static_cast<int64_t>(local.maneuver_labels.size()) != a ||
      static_cast<int64_t>(local.lane_labels.size()) != a)
    throw std::invalid_argument("featurize: label rows do not cover all agents");
  const int64_t nv = local.graph.size();

  SceneInputs in;
  in.agent_steps.reserve(static_cast<size_t>(a));
  in.anchors.reserve(static_cast<size_t>(a));
  in.targets.future_deltas = Tensor({a, t_fut * 2});
  in.targets.lane_hits = Tensor({a, nv});
  in.futures.resize(static_cast<size_t>(a));

  for (int64_t i = 0; i < a; ++i) {
    const AgentTrack& agent = local.agents[static_cast<size_t>(i)];
    if (static_cast<int64_t>(agent.history.size()) != t_hst)
      throw std::invalid_argument("featurize: agent " + std::to_string(agent.agent_id) + " has " +
                                  std::to_string(agent.history.size()) + " history steps, want " +
                                  std::to_string(t_hst));
    if (static_cast<int64_t>(agent.future.size()) != t_fut)
      throw std::invalid_argument("featurize: agent " + std::to_string(agent.agent_id) + " has " +
                                  std::to_string(agent.future.size()) + " future steps, want " +
                                  std::to_string(t_fut));

    Tensor steps({t_hst, kAgentFeatureDim});
    for (int64_t t = 0; t < t_hst; ++t) {
      const AgentStep& s = agent.history[static_cast<size_t>(t)];
      double* row = steps.data() + t * kAgentFeatureDim;
      row[0] = s.dx;
      row[1] = s.dy;
      row[2] = s.flag;
      row[3 + static_cast<int64_t>(agent.cls)] = 1.0;
    }
    in.agent_steps.push_back(std::move(steps));
    in.anchors.push_back({agent.anchor_x, agent.anchor_y});

    double px = agent.anchor_x, py = agent.anchor_y;
    for (int64_t t = 0; t < t_fut; ++t) {
      const std::array<double, 2>& p = agent.future[static_cast<size_t>(t)];
      in.targets.future_deltas.data()[i * t_fut * 2 + 2 * t] = p[0] - px;
      in.targets.future_deltas.data()[i * t_fut * 2 + 2 * t + 1] = p[1] - py;
      px = p[0];
      py = p[1];
    }
    in.futures[static_cast<size_t>(i)] = agent.future;

    in.targets.maneuvers.push_back(
        static_cast<int>(local.maneuver_labels[static_cast<size_t>(i)]));
    if (static_cast<int64_t>(local.lane_labels[static_cast<size_t>(i)].size()) != nv)
      throw std::invalid_argument("featurize: lane label row " + std::to_string(i) +
                                  " does not cover the graph");
    for (int64_t v = 0; v < nv; ++v)
      in.targets.lane_hits.data()[i * nv + v] =
          local.lane_labels[static_cast<size_t>(i)][static_cast<size_t>(v)] ? 1.0 : 0.0;
  }

  in.lane_feats = Tensor({nv, kLaneFeatureDim});
  in.lane_mids.reserve(static_cast<size_t>(nv));
  for (int64_t v = 0; v < nv; ++v) {
    const LaneVector& vec = local.graph.vectors[static_cast<size_t>(v)];
    double* row = in.lane_feats.data() + v * kLaneFeatureDim;
    row[0] = vec.dx;
    row[1] = vec.dy;
    row[2] = vec.heading;
    row[3 + static_cast<int64_t>(vec.turn)] = 1.0;
    row[6] = vec.traffic_control ? 1.0 : 0.0;
    row[7] = vec.intersection ? 1.0 : 0.0;
    in.lane_mids.push_back({vec.mid_x, vec.mid_y});
  }
  return in;
}

// ---------------------------------------------------------------------------

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kNoFeatureSelection: return "no_feature_selection";
    case Variant::kFullFeatureSelection: return "full_feature_selection";
    case Variant::kVanillaAttention: return "vanilla_attention";
    case Variant::kNoDecision: return "no_decision";
    case Variant::kNoLaneAtt: return "no_lane_att";
    case Variant::kNoAgentAtt: return "no_agent_att";
  }
  throw std::invalid_argument("variant_name: unknown variant");
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : all_variants())
    if (name == variant_name(v)) return v;
  throw std::invalid_argument("unknown model variant: " + name);
}

std::vector<Variant> all_variants() {
  return {Variant::kFull,       Variant::kNoFeatureSelection, Variant::kFullFeatureSelection,
          Variant::kVanillaAttention, Variant::kNoDecision,   Variant::kNoLaneAtt,
          Variant::kNoAgentAtt};
}

ModelConfig apply_variant(ModelConfig base, Variant v) {
  switch (v) {
    case Variant::kFull: break;
    case Variant::kNoFeatureSelection: base.no_feature_selection = true; break;
    case Variant::kFullFeatureSelection: base.full_feature_selection = true; break;
    case Variant::kVanillaAttention: base.vanilla_attention = true; break;
    case Variant::kNoDecision: base.no_decision = true; break;
    case Variant::kNoLaneAtt: base.no_lane_att = true; break;
    case Variant::kNoAgentAtt: base.no_agent_att = true; break;
  }
  return base;
}

// ---------------------------------------------------------------------------

namespace {

AttentionConfig attention_config(const ModelConfig& cfg) {
  AttentionConfig a;
  a.d_model = cfg.d_model;
  a.n_heads = cfg.n_heads;
  a.select_ratio = cfg.select_ratio;
  a.vanilla = cfg.vanilla_attention;
  return a;
}

DecoderConfig decoder_config(const ModelConfig& cfg) {
  DecoderConfig d;
  d.d_model = cfg.d_model;
  d.k_modes = cfg.k_modes;
  d.t_fut = cfg.t_fut;
  d.maneuver_head = !(cfg.no_decision || cfg.no_agent_att);
  return d;
}

}  // namespace

HolisticModel::HolisticModel(ParamRegistry& reg, Rng& rng, ModelConfig cfg)
    : cfg_(std::move(cfg)),
      agent_enc_(reg, "agent", rng, cfg_.t_hst, attention_config(cfg_), cfg_.nx_blocks),
      lane_embed_(reg, "lane.embed", rng, cfg_.d_model),
      static_lanes_(reg, "lane.static", rng, cfg_.d_model, cfg_.ng_blocks, cfg_.dilations),
      lane_update_(reg, "lane.update", rng, cfg_.d_model, cfg_.na_blocks),
      dynamic_lanes_(reg, "lane.dynamic", rng, cfg_.d_model, cfg_.ng_blocks, cfg_.dilations),
      lane_att_(reg, "lane_att", rng, cfg_.d_model),
      decoder_(reg, "decoder", rng, decoder_config(cfg_)) {
  if (!cfg_.no_feature_selection) {
    fuse_lane_.emplace(reg, "fuse.lane", rng, cfg_.d_model, cfg_.na_blocks);
    fuse_agent_.emplace(reg, "fuse.agent", rng, cfg_.d_model, cfg_.na_blocks);
  }
}

HolisticModel::Output HolisticModel::forward(Tape& tape, const SceneInputs& in,
                                             const LaneGraph& graph,
                                             AttentionTrace* ego_trace) const {
  const int64_t a = static_cast<int64_t>(in.agent_steps.size());
  if (a == 0) throw std::invalid_argument("model: no agents");
  if (in.lane_feats.rows() != graph.size())
    throw ShapeError("model: " + std::to_string(in.lane_feats.rows()) + " lane feature rows vs " +
                     std::to_string(graph.size()) + " graph vectors");

  std::vector<Tensor> agent_rows;
  agent_rows.reserve(static_cast<size_t>(a));
  for (int64_t i = 0; i < a; ++i)
    agent_rows.push_back(
        agent_enc_.forward(tape, in.agent_steps[static_cast<size_t>(i)],
                           i == 0 ? ego_trace : nullptr));
  const Tensor x_a = concat_rows(tape, agent_rows);

  const double eps_al = cfg_.full_feature_selection
                            ? std::numeric_limits<double>::infinity()
                            : cfg_.eps_agent_lane;
  const double eps_aa = cfg_.full_feature_selection
                            ? std::numeric_limits<double>::infinity()
                            : cfg_.eps_agent_agent;

  // lane passes: static topology first, then conditioned on the agents
  const Tensor x_sl = static_lanes_.forward(tape, lane_embed_.forward(tape, in.lane_feats), graph);
  const std::vector<ToiPair> pairs_la = toi_select(in.lane_mids, in.anchors, eps_al);
  const Tensor x_dl = dynamic_lanes_.forward(
      tape, lane_update_.forward(tape, x_sl, x_a, pairs_la).fused, graph);

  Tensor fused = x_a, att_lane = x_a, att_agent = x_a;
  if (!cfg_.no_feature_selection) {
    const std::vector<ToiPair> pairs_al = toi_select(in.anchors, in.lane_mids, eps_al);
    const FusionResult f1 = fuse_lane_->forward(tape, x_a, x_dl, pairs_al);
    const std::vector<ToiPair> pairs_aa = toi_select(in.anchors, in.anchors, eps_aa, true);
    const FusionResult f2 = fuse_agent_->forward(tape, f1.fused, f1.fused, pairs_aa);
    fused = f2.fused;
    att_lane = f1.att;
    att_agent = f2.att;
  }

  const LaneAttentionResult la = lane_att_.forward(tape, fused, x_dl);
  const DecoderOutput dec = decoder_.forward(tape, la.fused, att_lane, att_agent);

  Tensor lane_weights;
  if (!cfg_.no_decision && !cfg_.no_lane_att) lane_weights = la.weights;
  return {dec, lane_weights};
}

}  // namespace lanecast
