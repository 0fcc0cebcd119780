#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "lanecast/experiments.hpp"
#include "lanecast/generator.hpp"

using namespace lanecast;

namespace {

ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_heads = 2;
  cfg.k_modes = 3;
  cfg.nx_blocks = 1;
  cfg.ng_blocks = 1;
  cfg.na_blocks = 1;
  cfg.dilations = {1};
  return cfg;
}

std::vector<Scenario> tiny_set(uint64_t seed, int n) {
  GenConfig g;
  g.fixed_map = static_cast<int>(MapKind::kStraight);
  std::vector<Scenario> out;
  for (const Scenario& s : generate_batch(seed, n, g)) out.push_back(to_local_frame(s));
  return out;
}

}  // namespace

TEST_CASE("evaluation covers every agent and serializes deterministically") {
  const std::vector<Scenario> data = tiny_set(31, 3);
  int64_t agents = 0, cells = 0;
  for (const Scenario& s : data) {
    agents += static_cast<int64_t>(s.agents.size());
    cells += static_cast<int64_t>(s.agents.size()) * s.graph.size();
  }

  ParamRegistry reg;
  Rng rng(9);
  HolisticModel model(reg, rng, tiny_model_config());

  const EvalSummary s1 = evaluate_model(model, data);
  CHECK(s1.traj.n_agents == agents);
  CHECK(s1.traj.n_skipped == 0);
  CHECK(s1.man.n_agents == agents);
  CHECK(s1.lane.n_cells == cells);
  CHECK(s1.traj.min_ade_k <= s1.traj.min_ade_k1);
  CHECK(s1.traj.min_fde_k <= s1.traj.min_fde_k1);

  const std::string csv = metrics_csv(s1);
  CHECK(csv == metrics_csv(evaluate_model(model, data)));
  CHECK(csv.find("metric,value\n") == 0);
  CHECK(csv.find("min_ade_k1,") != std::string::npos);
  CHECK(csv.find("yield_f1,") != std::string::npos);
  CHECK(csv.find("lane_case_recall,") != std::string::npos);

  const std::string text = metrics_text(s1);
  CHECK(text.find("minADE") != std::string::npos);
  CHECK(text.find("yield") != std::string::npos);
}

TEST_CASE("decision metrics vanish for variants that do not emit them") {
  const std::vector<Scenario> data = tiny_set(32, 2);
  ParamRegistry reg;
  Rng rng(9);
  HolisticModel model(reg, rng, apply_variant(tiny_model_config(), Variant::kNoDecision));
  const EvalSummary s = evaluate_model(model, data);
  CHECK(s.man.n_agents == 0);
  CHECK(s.lane.n_cells == 0);
  CHECK(s.traj.n_agents > 0);
}

TEST_CASE("noise sweep shapes, baselines and determinism") {
  const std::vector<Scenario> data = tiny_set(33, 2);
  ParamRegistry r1, r2;
  Rng g1(4), g2(4);
  HolisticModel sparse(r1, g1, tiny_model_config());
  HolisticModel vanilla(r2, g2, apply_variant(tiny_model_config(), Variant::kVanillaAttention));

  const std::vector<double> probs = {0.0, 0.05};
  const std::vector<NoiseCell> cells = noise_sweep(sparse, vanilla, data, probs,
                                                   NoiseSpec::Mode::kGaussian, 2, 77);
  REQUIRE(cells.size() == 4);
  CHECK(cells[0].model == "sparse");
  CHECK(cells[2].model == "vanilla");
  CHECK(cells[0].probability == 0.0);
  CHECK(cells[1].probability == 0.05);

  // the zero-probability rows replay the clean evaluation exactly
  const EvalSummary base = evaluate_model(sparse, data);
  CHECK(cells[0].mean_fde == base.traj.min_fde_k);
  CHECK(cells[0].var_fde == 0.0);
  CHECK(cells[0].fde_increment == 0.0);
  CHECK(cells[0].fde_increment_ratio == 0.0);

  // increments are measured against that model's own baseline
  CHECK(cells[1].fde_increment == doctest::Approx(cells[1].mean_fde - cells[0].mean_fde));
  CHECK(cells[3].fde_increment == doctest::Approx(cells[3].mean_fde - cells[2].mean_fde));

  const std::vector<NoiseCell> again = noise_sweep(sparse, vanilla, data, probs,
                                                   NoiseSpec::Mode::kGaussian, 2, 77);
  for (size_t i = 0; i < cells.size(); ++i) {
    CHECK(cells[i].mean_fde == again[i].mean_fde);
    CHECK(cells[i].var_ade == again[i].var_ade);
  }

  const std::string csv = noise_sweep_csv(cells);
  CHECK(csv.find("model,probability,") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);

  CHECK_THROWS_AS((void)noise_sweep(sparse, vanilla, {}, probs, NoiseSpec::Mode::kLoss, 1, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)noise_sweep(sparse, vanilla, data, probs, NoiseSpec::Mode::kLoss, 0, 0),
                  std::invalid_argument);
}

TEST_CASE("ablation driver trains and reports every variant") {
  const std::vector<Scenario> train_set = tiny_set(34, 2);
  const std::vector<Scenario> eval_set = tiny_set(35, 2);
  TrainConfig base;
  base.model = tiny_model_config();
  base.steps = 2;
  base.batch_size = 2;
  base.seed = 1;

  const std::vector<AblationRow> rows = run_ablations(base, train_set, eval_set);
  REQUIRE(rows.size() == all_variants().size());
  int64_t full_params = 0;
  for (const AblationRow& r : rows) {
    CHECK(r.params > 0);
    CHECK(r.min_ade_k >= 0.0);
    CHECK(r.min_fde_k1 >= r.min_fde_k);
    if (r.variant == "full") full_params = r.params;
  }
  CHECK(rows[0].variant == "full");
  for (const AblationRow& r : rows) {
    if (r.variant == "vanilla_attention" || r.variant == "no_lane_att")
      CHECK(r.params == full_params);
    if (r.variant == "no_feature_selection" || r.variant == "no_decision")
      CHECK(r.params < full_params);
  }

  const std::string csv = ablation_csv(rows);
  CHECK(csv.find("variant,params,min_ade_k1,min_fde_k1,min_ade_k,min_fde_k\n") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 8);
  CHECK(csv.find("full_feature_selection,") != std::string::npos);
}

TEST_CASE("attention exports cover every pair and paint the overlay") {
  const std::vector<Scenario> data = tiny_set(36, 1);
  const Scenario& s = data[0];
  const SceneInputs in = featurize(s, 20, 30);

  ParamRegistry reg;
  Rng rng(12);
  HolisticModel model(reg, rng, tiny_model_config());
  Tape tape(false);
  const HolisticModel::Output out = model.forward(tape, in, s.graph);

  const std::string csv = attention_csv(out.lane_weights);
  const int64_t rows = static_cast<int64_t>(std::count(csv.begin(), csv.end(), '\n')) - 1;
  CHECK(rows == out.lane_weights.rows() * out.lane_weights.cols());
  CHECK(csv.find("agent,lane,weight\n") == 0);

  const std::string svg = attention_svg(s, out, in.anchors, in.futures, 0);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("<line") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
  CHECK(svg.find("<circle") != std::string::npos);
  CHECK(svg.find("rgb(") != std::string::npos);
  CHECK(svg.rfind("</svg>\n") == svg.size() - 7);

  CHECK_THROWS_AS((void)attention_svg(s, out, in.anchors, in.futures, 99),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)attention_csv(Tensor()), std::runtime_error);

  ParamRegistry reg2;
  Rng rng2(12);
  HolisticModel gated(reg2, rng2, apply_variant(tiny_model_config(), Variant::kNoLaneAtt));
  Tape tape2(false);
  const HolisticModel::Output out2 = gated.forward(tape2, in, s.graph);
  CHECK_THROWS_AS((void)attention_svg(s, out2, in.anchors, in.futures, 0), std::runtime_error);
}

TEST_CASE("property suites pass and report") {
  const PropertyCheck eq = check_sparse_full_equivalence(7);
  CHECK(eq.ok);
  CHECK(eq.total == 100);
  CHECK(eq.worst <= 1e-6);

  const PropertyCheck kl = check_kl_bound(8);
  CHECK(kl.ok);
  CHECK(kl.total == 4000);

  const PropertyCheck ent = check_entropy_bound(9);
  CHECK(ent.ok);
  CHECK(ent.total == 3003);

  const std::vector<PropertyCheck> grads = check_layer_gradients(10);
  REQUIRE(grads.size() == 11);
  for (const PropertyCheck& pc : grads) {
    INFO(pc.name, " worst ", pc.worst);
    CHECK(pc.ok);
    CHECK(pc.total >= 100);
  }

  std::vector<PropertyCheck> all = {eq, kl, ent};
  CHECK(properties_ok(all));
  all.push_back(PropertyCheck{"doomed", 0, 1, 1.0, false});
  CHECK_FALSE(properties_ok(all));

  const std::string report = property_report(all);
  CHECK(report.find("PASS  sparse_full_equivalence") != std::string::npos);
  CHECK(report.find("FAIL  doomed") != std::string::npos);
}
