#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lanecast/generator.hpp"
#include "lanecast/gradcheck.hpp"
#include "lanecast/model.hpp"
#include "lanecast/ops.hpp"

using namespace lanecast;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.select_ratio = 0.75;
  cfg.t_hst = 20;
  cfg.t_fut = 30;
  cfg.k_modes = 3;
  cfg.nx_blocks = 1;
  cfg.ng_blocks = 1;
  cfg.na_blocks = 1;
  cfg.dilations = {1};
  return cfg;
}

Scenario tiny_scene(uint64_t seed) {
  GenConfig g;
  g.fixed_map = static_cast<int>(MapKind::kStraight);
  g.fixed_behavior = static_cast<int>(Behavior::kFollow);
  bool undef = false;
  return to_local_frame(generate_scenario(seed, g), &undef);
}

}  // namespace

TEST_CASE("featurize maps tracks and lanes onto the network inputs") {
  const Scenario s = tiny_scene(7);
  const SceneInputs in = featurize(s, 20, 30);

  const int64_t a = static_cast<int64_t>(s.agents.size());
  REQUIRE(static_cast<int64_t>(in.agent_steps.size()) == a);
  REQUIRE(static_cast<int64_t>(in.anchors.size()) == a);
  CHECK(in.lane_feats.rows() == s.graph.size());
  CHECK(in.lane_feats.cols() == kLaneFeatureDim);
  CHECK(static_cast<int64_t>(in.lane_mids.size()) == s.graph.size());
  CHECK(in.targets.future_deltas.rows() == a);
  CHECK(in.targets.future_deltas.cols() == 60);
  CHECK(in.targets.lane_hits.rows() == a);
  CHECK(in.targets.lane_hits.cols() == s.graph.size());
  CHECK(static_cast<int64_t>(in.targets.maneuvers.size()) == a);

  // agent rows copy displacement, flag, class one-hot
  const AgentTrack& ego = s.agents[0];
  const Tensor& steps = in.agent_steps[0];
  REQUIRE(steps.rows() == 20);
  REQUIRE(steps.cols() == kAgentFeatureDim);
  for (int64_t t = 0; t < 20; ++t) {
    const AgentStep& h = ego.history[static_cast<size_t>(t)];
    const double* row = steps.data() + t * kAgentFeatureDim;
    CHECK(row[0] == h.dx);
    CHECK(row[1] == h.dy);
    CHECK(row[2] == static_cast<double>(h.flag));
    for (int c = 0; c < 3; ++c)
      CHECK(row[3 + c] == (c == static_cast<int>(ego.cls) ? 1.0 : 0.0));
  }
  CHECK(in.anchors[0][0] == ego.anchor_x);
  CHECK(in.anchors[0][1] == ego.anchor_y);

  // future deltas rebuild the stored positions when cumulated from the anchor
  double px = ego.anchor_x, py = ego.anchor_y;
  for (int64_t t = 0; t < 30; ++t) {
    px += in.targets.future_deltas.data()[2 * t];
    py += in.targets.future_deltas.data()[2 * t + 1];
    CHECK(px == doctest::Approx(ego.future[static_cast<size_t>(t)][0]).epsilon(1e-12));
    CHECK(py == doctest::Approx(ego.future[static_cast<size_t>(t)][1]).epsilon(1e-12));
  }
  REQUIRE(in.futures.size() == s.agents.size());
  CHECK(in.futures[0] == ego.future);

  // lane rows copy geometry, attributes, one-hot turn
  for (int64_t v = 0; v < s.graph.size(); ++v) {
    const LaneVector& vec = s.graph.vectors[static_cast<size_t>(v)];
    const double* row = in.lane_feats.data() + v * kLaneFeatureDim;
    CHECK(row[0] == vec.dx);
    CHECK(row[1] == vec.dy);
    CHECK(row[2] == vec.heading);
    for (int c = 0; c < 3; ++c)
      CHECK(row[3 + c] == (c == static_cast<int>(vec.turn) ? 1.0 : 0.0));
    CHECK(row[6] == (vec.traffic_control ? 1.0 : 0.0));
    CHECK(row[7] == (vec.intersection ? 1.0 : 0.0));
    CHECK(in.lane_mids[static_cast<size_t>(v)][0] == vec.mid_x);
    CHECK(in.lane_mids[static_cast<size_t>(v)][1] == vec.mid_y);
  }

  // labels carried through verbatim
  for (int64_t i = 0; i < a; ++i) {
    CHECK(in.targets.maneuvers[static_cast<size_t>(i)] ==
          static_cast<int>(s.maneuver_labels[static_cast<size_t>(i)]));
    for (int64_t v = 0; v < s.graph.size(); ++v)
      CHECK(in.targets.lane_hits.data()[i * s.graph.size() + v] ==
            (s.lane_labels[static_cast<size_t>(i)][static_cast<size_t>(v)] ? 1.0 : 0.0));
  }

  CHECK_THROWS_AS((void)featurize(s, 21, 30), std::invalid_argument);
  CHECK_THROWS_AS((void)featurize(s, 20, 31), std::invalid_argument);
}

TEST_CASE("variant names round-trip") {
  for (Variant v : all_variants()) CHECK(variant_from_name(variant_name(v)) == v);
  CHECK_THROWS_AS((void)variant_from_name("dense"), std::invalid_argument);
  CHECK(apply_variant(tiny_config(), Variant::kNoDecision).no_decision);
  CHECK(apply_variant(tiny_config(), Variant::kVanillaAttention).vanilla_attention);
  CHECK_FALSE(apply_variant(tiny_config(), Variant::kFull).no_feature_selection);
}

TEST_CASE("variant parameter counts relate as the architecture implies") {
  auto count = [](Variant v) {
    ParamRegistry reg;
    Rng rng(99);
    HolisticModel model(reg, rng, apply_variant(tiny_config(), v));
    return reg.total_count();
  };
  const int64_t full = count(Variant::kFull);
  // forward-only switches keep the parameter set intact
  CHECK(count(Variant::kVanillaAttention) == full);
  CHECK(count(Variant::kFullFeatureSelection) == full);
  // the lane decision reuses attention weights, so removing it frees nothing
  CHECK(count(Variant::kNoLaneAtt) == full);
  // dropping the maneuver decision removes exactly its linear head
  const int64_t no_dec = count(Variant::kNoDecision);
  CHECK(no_dec == count(Variant::kNoAgentAtt));
  CHECK(no_dec == full - (2 * 16 * kManeuverCount + kManeuverCount));
  // dropping pairwise fusion removes both agent-side stacks
  CHECK(count(Variant::kNoFeatureSelection) < no_dec);
}

TEST_CASE("forward produces coherent shapes and finite losses") {
  const Scenario s = tiny_scene(11);
  const SceneInputs in = featurize(s, 20, 30);
  const int64_t a = static_cast<int64_t>(s.agents.size());
  const int64_t nv = s.graph.size();

  ParamRegistry reg;
  Rng rng(5);
  const ModelConfig cfg = tiny_config();
  HolisticModel model(reg, rng, cfg);

  Tape tape;
  AttentionTrace trace;
  const HolisticModel::Output out = model.forward(tape, in, s.graph, &trace);

  CHECK(out.dec.deltas.rows() == a * cfg.k_modes);
  CHECK(out.dec.deltas.cols() == cfg.t_fut * 2);
  CHECK(out.dec.endpoints.rows() == a * cfg.k_modes);
  CHECK(out.dec.traj_probs.rows() == a);
  CHECK(out.dec.traj_probs.cols() == cfg.k_modes);
  CHECK(out.dec.maneuver_probs.rows() == a);
  CHECK(out.dec.maneuver_probs.cols() == kManeuverCount);
  CHECK(out.lane_weights.rows() == a);
  CHECK(out.lane_weights.cols() == nv);
  for (int64_t i = 0; i < out.lane_weights.numel(); ++i) {
    CHECK(out.lane_weights.data()[i] > 0.0);
    CHECK(out.lane_weights.data()[i] < 1.0);
  }
  CHECK(static_cast<int64_t>(trace.selected.size()) == cfg.n_heads);

  const LossBreakdown loss = compute_losses(tape, out.dec, out.lane_weights, in.targets);
  CHECK(std::isfinite(loss.total.data()[0]));
  CHECK(loss.margin.data()[0] >= 0.0);
  CHECK(loss.traj_ce.data()[0] > 0.0);
  CHECK(loss.lane_ce.data()[0] > 0.0);
  CHECK(loss.agent_ce.data()[0] > 0.0);
}

TEST_CASE("variants gate the decision outputs") {
  const Scenario s = tiny_scene(13);
  const SceneInputs in = featurize(s, 20, 30);

  auto run = [&](Variant v) {
    ParamRegistry reg;
    Rng rng(21);
    HolisticModel model(reg, rng, apply_variant(tiny_config(), v));
    Tape tape(false);
    return model.forward(tape, in, s.graph);
  };

  const HolisticModel::Output full = run(Variant::kFull);
  CHECK(full.dec.maneuver_probs.numel() > 0);
  CHECK(full.lane_weights.numel() > 0);

  const HolisticModel::Output nd = run(Variant::kNoDecision);
  CHECK(nd.dec.maneuver_probs.numel() == 0);
  CHECK(nd.lane_weights.numel() == 0);
  CHECK(nd.dec.traj_probs.rows() == full.dec.traj_probs.rows());

  const HolisticModel::Output nl = run(Variant::kNoLaneAtt);
  CHECK(nl.dec.maneuver_probs.numel() > 0);
  CHECK(nl.lane_weights.numel() == 0);

  const HolisticModel::Output na = run(Variant::kNoAgentAtt);
  CHECK(na.dec.maneuver_probs.numel() == 0);
  CHECK(na.lane_weights.numel() > 0);

  // the losses accept gated outputs: the matching terms collapse to zero
  Tape tape(false);
  const LossBreakdown lb = compute_losses(tape, nd.dec, nd.lane_weights, in.targets);
  CHECK(lb.agent_ce.data()[0] == 0.0);
  CHECK(lb.lane_ce.data()[0] == 0.0);
  CHECK(std::isfinite(lb.total.data()[0]));
}

TEST_CASE("same seed gives identical outputs, vanilla differs from sparse") {
  const Scenario s = tiny_scene(17);
  const SceneInputs in = featurize(s, 20, 30);

  auto run = [&](Variant v, uint64_t seed) {
    ParamRegistry reg;
    Rng rng(seed);
    HolisticModel model(reg, rng, apply_variant(tiny_config(), v));
    Tape tape(false);
    return model.forward(tape, in, s.graph);
  };

  const HolisticModel::Output a1 = run(Variant::kFull, 31);
  const HolisticModel::Output a2 = run(Variant::kFull, 31);
  REQUIRE(a1.dec.deltas.numel() == a2.dec.deltas.numel());
  double diff = 0.0;
  for (int64_t i = 0; i < a1.dec.deltas.numel(); ++i)
    diff = std::max(diff, std::abs(a1.dec.deltas.data()[i] - a2.dec.deltas.data()[i]));
  CHECK(diff == 0.0);

  // vanilla attention shares the parameter draw but attends densely, so with
  // a selection ratio below one the outputs must differ somewhere
  const HolisticModel::Output v1 = run(Variant::kVanillaAttention, 31);
  double dv = 0.0;
  for (int64_t i = 0; i < a1.dec.deltas.numel(); ++i)
    dv = std::max(dv, std::abs(a1.dec.deltas.data()[i] - v1.dec.deltas.data()[i]));
  CHECK(dv > 0.0);
}

TEST_CASE("gradient flows from the total loss back to an agent history") {
  const Scenario s = tiny_scene(23);
  SceneInputs in = featurize(s, 20, 30);

  ParamRegistry reg;
  Rng rng(41);
  ModelConfig cfg = tiny_config();
  cfg.d_model = 8;
  cfg.n_heads = 2;
  HolisticModel model(reg, rng, cfg);

  Rng pick(77);
  const GradCheckReport rep = finite_difference_check(
      [&](Tape& tape, const Tensor& steps) {
        SceneInputs probe = in;
        probe.agent_steps[0] = steps;
        const HolisticModel::Output out = model.forward(tape, probe, s.graph);
        const LossBreakdown lb = compute_losses(tape, out.dec, out.lane_weights, probe.targets);
        return lb.total;
      },
      in.agent_steps[0], 1e-5, 12, pick);
  CHECK(rep.all_finite);
  CHECK(rep.ok(1e-3));
}
