#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "lanecast/decoder.hpp"
#include "lanecast/encoder.hpp"
#include "lanecast/fusion.hpp"
#include "lanecast/losses.hpp"
#include "lanecast/scenario.hpp"

namespace lanecast {

// Everything the network consumes for one scene, plus the training targets.
// Built from a scenario already expressed in the ego frame.
struct SceneInputs {
  std::vector<Tensor> agent_steps;            // per agent, [t_hst, kAgentFeatureDim]
  std::vector<std::array<double, 2>> anchors;  // agent positions at the last history step
  Tensor lane_feats;                          // [Nv, kLaneFeatureDim]
  std::vector<std::array<double, 2>> lane_mids;
  LossTargets targets;
  std::vector<std::vector<std::array<double, 2>>> futures;  // ground-truth positions
};

SceneInputs featurize(const Scenario& local, int64_t t_hst, int64_t t_fut);

struct ModelConfig {
  int64_t d_model = 64;
  int64_t n_heads = 4;
  double select_ratio = 0.75;
  int64_t t_hst = 20;
  int64_t t_fut = 30;
  int64_t k_modes = 6;
  int64_t nx_blocks = 3;  // temporal self-attention depth
  int64_t ng_blocks = 4;  // lane graph depth, per pass
  int64_t na_blocks = 2;  // pairwise fusion depth
  std::vector<int> dilations = {1, 2};
  double eps_agent_lane = 10.0;   // interest radius between agents and lane vectors
  double eps_agent_agent = 30.0;  // interest radius between agents

  // variant switches
  bool vanilla_attention = false;       // dense temporal attention
  bool no_feature_selection = false;    // drop the pairwise fusion network
  bool full_feature_selection = false;  // keep every pair regardless of distance
  bool no_decision = false;             // emit neither decision output
  bool no_lane_att = false;             // emit no lane decision
  bool no_agent_att = false;            // emit no maneuver decision
};

enum class Variant {
  kFull = 0,
  kNoFeatureSelection,
  kFullFeatureSelection,
  kVanillaAttention,
  kNoDecision,
  kNoLaneAtt,
  kNoAgentAtt,
};

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);
std::vector<Variant> all_variants();
ModelConfig apply_variant(ModelConfig base, Variant v);

// The full network: per-agent temporal encoding, two-pass lane graph
// encoding with an agent-conditioned update in between, pairwise fusion,
// sigmoid lane attention, and the trajectory/decision decoder.
class HolisticModel {
 public:
  struct Output {
    DecoderOutput dec;
    Tensor lane_weights;  // [A, Nv]; empty when the lane decision is off
  };

  HolisticModel(ParamRegistry& reg, Rng& rng, ModelConfig cfg);
  // ego_trace, when given, receives the temporal attention trace of agent 0's
  // last encoder block
  Output forward(Tape& tape, const SceneInputs& in, const LaneGraph& graph,
                 AttentionTrace* ego_trace = nullptr) const;
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  AgentEncoder agent_enc_;
  LaneEmbed lane_embed_;
  LaneConvStack static_lanes_;
  FeatureSelectionStack lane_update_;  // lanes attend to agents between passes
  LaneConvStack dynamic_lanes_;
  std::optional<FeatureSelectionStack> fuse_lane_;   // agents <- lane vectors
  std::optional<FeatureSelectionStack> fuse_agent_;  // agents <- agents
  SigmoidLaneAttention lane_att_;
  Decoder decoder_;
};

}  // namespace lanecast
