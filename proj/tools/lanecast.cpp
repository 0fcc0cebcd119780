#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lanecast/experiments.hpp"
#include "lanecast/generator.hpp"

namespace fs = std::filesystem;
using namespace lanecast;

namespace {

struct CommonOpts {
  std::string config;
  std::string out = ".";
  uint64_t seed = 0;
  bool seed_given = false;
};

void attach_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config, "JSON config file; absent keys keep their defaults");
  cmd->add_option("--out", opts.out, "output directory (created if missing)");
  cmd->add_option("--seed", opts.seed, "seed override")->each([&](const std::string&) {
    opts.seed_given = true;
  });
}

TrainConfig resolve_config(const CommonOpts& opts) {
  TrainConfig cfg;
  if (!opts.config.empty()) cfg = load_train_config(opts.config);
  if (opts.seed_given) cfg.seed = opts.seed;
  return cfg;
}

std::string out_file(const CommonOpts& opts, const std::string& name) {
  fs::create_directories(opts.out);
  return (fs::path(opts.out) / name).string();
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << body;
}

// Scenario files hold tracks in their generated frame; every consumer works
// in the ego frame.
std::vector<Scenario> load_dataset(const std::string& path) {
  std::vector<Scenario> out;
  for (Scenario& s : load_scenarios(path)) out.push_back(to_local_frame(s));
  if (out.empty()) throw std::runtime_error("dataset is empty: " + path);
  return out;
}

struct LoadedModel {
  ParamRegistry reg;
  std::optional<HolisticModel> model;
};

LoadedModel build_model(const TrainConfig& cfg, const std::string& variant_override = "") {
  LoadedModel lm;
  const std::string name = variant_override.empty() ? cfg.variant : variant_override;
  Rng rng(cfg.seed);
  lm.model.emplace(lm.reg, rng, apply_variant(cfg.model, variant_from_name(name)));
  return lm;
}

int parse_map_kind(const std::string& name) {
  if (name == "mixed") return -1;
  const char* names[] = {"straight", "curve", "lane_change", "t_junction", "crossing"};
  for (int i = 0; i < kMapKinds; ++i)
    if (name == names[i]) return i;
  throw std::runtime_error("unknown map kind: " + name +
                           " (straight, curve, lane_change, t_junction, crossing, mixed)");
}

// --- subcommand bodies ---

int cmd_gen(const CommonOpts& opts, const std::string& map_name, int count) {
  const TrainConfig cfg = resolve_config(opts);
  GenConfig g;
  g.t_hst = static_cast<int>(cfg.model.t_hst);
  g.t_fut = static_cast<int>(cfg.model.t_fut);
  g.fixed_map = parse_map_kind(map_name);
  const std::vector<Scenario> batch = generate_batch(cfg.seed, count, g);
  const std::string path = out_file(opts, "scenarios.jsonl");
  save_scenarios(path, batch);
  std::cout << "wrote " << batch.size() << " scenarios to " << path << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts, const std::string& data_path) {
  const TrainConfig cfg = resolve_config(opts);
  const std::vector<Scenario> data = load_dataset(data_path);

  Trainer trainer(cfg);
  const std::string log_path = out_file(opts, "train.log");
  std::ofstream log(log_path);
  if (!log) throw std::runtime_error("cannot write " + log_path);
  const TrainResult res = trainer.run(data, &log);

  const std::string ckpt_path = out_file(opts, "checkpoint.bin");
  save_checkpoint(trainer.params(), ckpt_path);

  RunManifest m;
  m.config_json = train_config_json(cfg);
  m.seed = cfg.seed;
  m.data_hash = fnv1a64_file(data_path);
  m.outputs = {ckpt_path, log_path};
  save_manifest(m, out_file(opts, "manifest.json"));

  std::cout << "steps " << res.steps_done << "  loss " << res.initial_loss << " -> "
            << res.final_loss;
  if (res.steps_skipped > 0) std::cout << "  (" << res.steps_skipped << " steps skipped)";
  std::cout << "\ncheckpoint: " << ckpt_path << "\n";
  if (res.diverged) {
    std::cerr << "error: training diverged; checkpoint holds the last finite state\n";
    return 1;
  }
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& data_path, const std::string& ckpt) {
  const TrainConfig cfg = resolve_config(opts);
  const std::vector<Scenario> data = load_dataset(data_path);
  LoadedModel lm = build_model(cfg);
  load_checkpoint(lm.reg, ckpt);

  const EvalSummary s = evaluate_model(*lm.model, data);
  write_file(out_file(opts, "metrics.csv"), metrics_csv(s));
  write_file(out_file(opts, "metrics.txt"), metrics_text(s));
  std::cout << metrics_text(s);
  return 0;
}

int cmd_noise_sweep(const CommonOpts& opts, const std::string& data_path,
                    const std::string& ckpt_sparse, const std::string& ckpt_vanilla,
                    const std::string& mode_name, int trials) {
  const TrainConfig cfg = resolve_config(opts);
  const std::vector<Scenario> data = load_dataset(data_path);

  LoadedModel sparse = build_model(cfg);
  load_checkpoint(sparse.reg, ckpt_sparse);
  LoadedModel vanilla = build_model(cfg, "vanilla_attention");
  load_checkpoint(vanilla.reg, ckpt_vanilla);

  NoiseSpec::Mode mode;
  if (mode_name == "loss")
    mode = NoiseSpec::Mode::kLoss;
  else if (mode_name == "gaussian")
    mode = NoiseSpec::Mode::kGaussian;
  else
    throw std::runtime_error("unknown noise mode: " + mode_name + " (loss, gaussian)");

  const std::vector<double> probs = {0.0, 0.01, 0.03, 0.05, 0.08};
  const std::vector<NoiseCell> cells =
      noise_sweep(*sparse.model, *vanilla.model, data, probs, mode, trials, cfg.seed);
  const std::string csv = noise_sweep_csv(cells);
  write_file(out_file(opts, "noise_sweep.csv"), csv);
  std::cout << csv;
  return 0;
}

int cmd_ablate(const CommonOpts& opts, const std::string& data_path,
               const std::string& eval_path) {
  const TrainConfig cfg = resolve_config(opts);
  const std::vector<Scenario> train_set = load_dataset(data_path);
  const std::vector<Scenario> eval_set =
      eval_path.empty() ? train_set : load_dataset(eval_path);

  const std::string log_path = out_file(opts, "ablate.log");
  std::ofstream log(log_path);
  const std::vector<AblationRow> rows = run_ablations(cfg, train_set, eval_set, &log);
  const std::string csv = ablation_csv(rows);
  write_file(out_file(opts, "ablation.csv"), csv);
  std::cout << csv;
  return 0;
}

int cmd_export_attn(const CommonOpts& opts, const std::string& data_path,
                    const std::string& ckpt, int64_t index, int64_t agent) {
  const TrainConfig cfg = resolve_config(opts);
  const std::vector<Scenario> data = load_dataset(data_path);
  if (index < 0 || index >= static_cast<int64_t>(data.size()))
    throw std::runtime_error("scenario index out of range (file has " +
                             std::to_string(data.size()) + " records)");
  const Scenario& s = data[static_cast<size_t>(index)];

  LoadedModel lm = build_model(cfg);
  load_checkpoint(lm.reg, ckpt);
  const SceneInputs in = featurize(s, cfg.model.t_hst, cfg.model.t_fut);
  Tape tape(false);
  const HolisticModel::Output out = lm.model->forward(tape, in, s.graph);

  write_file(out_file(opts, "attention.csv"), attention_csv(out.lane_weights));
  write_file(out_file(opts, "attention.svg"),
             attention_svg(s, out, in.anchors, in.futures, agent));
  std::cout << "wrote attention.csv and attention.svg for scenario " << index << ", agent "
            << agent << "\n";
  return 0;
}

int report_checks(const CommonOpts& opts, const std::vector<PropertyCheck>& checks,
                  const char* file_name) {
  const std::string report = property_report(checks);
  write_file(out_file(opts, file_name), report);
  std::cout << report;
  if (!properties_ok(checks)) {
    std::cerr << "error: some checks failed\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lane-graph trajectory prediction and behavior decision toolkit"};
  app.require_subcommand(1);

  CommonOpts gen_opts, train_opts, eval_opts, sweep_opts, ablate_opts, attn_opts, grad_opts,
      prop_opts;

  auto* gen = app.add_subcommand("gen", "generate a synthetic scenario file");
  std::string gen_map = "mixed";
  int gen_n = 16;
  gen->add_option("--map", gen_map, "map kind or 'mixed'");
  gen->add_option("--n", gen_n, "number of scenarios")->check(CLI::PositiveNumber);
  attach_common(gen, gen_opts);

  auto* train = app.add_subcommand("train", "train a model on a scenario file");
  std::string train_data;
  train->add_option("--data", train_data, "scenario file")->required();
  attach_common(train, train_opts);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a scenario file");
  std::string eval_data, eval_ckpt;
  eval->add_option("--data", eval_data, "scenario file")->required();
  eval->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
  attach_common(eval, eval_opts);

  auto* sweep = app.add_subcommand("noise-sweep", "degradation table under input noise");
  std::string sweep_data, sweep_sparse, sweep_vanilla, sweep_mode = "gaussian";
  int sweep_trials = 8;
  sweep->add_option("--data", sweep_data, "frozen eval scenario file")->required();
  sweep->add_option("--ckpt-sparse", sweep_sparse, "sparse-attention checkpoint")->required();
  sweep->add_option("--ckpt-vanilla", sweep_vanilla, "dense-attention checkpoint")->required();
  sweep->add_option("--mode", sweep_mode, "noise mode: loss or gaussian");
  sweep->add_option("--trials", sweep_trials, "noise trials per cell")->check(CLI::PositiveNumber);
  attach_common(sweep, sweep_opts);

  auto* ablate = app.add_subcommand("ablate", "train and score every architecture variant");
  std::string ablate_data, ablate_eval;
  ablate->add_option("--data", ablate_data, "training scenario file")->required();
  ablate->add_option("--eval-data", ablate_eval, "eval scenario file (defaults to --data)");
  attach_common(ablate, ablate_opts);

  auto* attn = app.add_subcommand("export-attn", "lane attention CSV and SVG overlay");
  std::string attn_data, attn_ckpt;
  int64_t attn_index = 0, attn_agent = 0;
  attn->add_option("--data", attn_data, "scenario file")->required();
  attn->add_option("--ckpt", attn_ckpt, "checkpoint file")->required();
  attn->add_option("--index", attn_index, "scenario record to draw");
  attn->add_option("--agent", attn_agent, "agent whose weights color the lanes");
  attach_common(attn, attn_opts);

  auto* grad = app.add_subcommand("grad-check", "finite-difference pass over every layer");
  attach_common(grad, grad_opts);

  auto* prop = app.add_subcommand("prop-check", "sparsity, entropy and gradient suites");
  attach_common(prop, prop_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(gen_opts, gen_map, gen_n);
    if (train->parsed()) return cmd_train(train_opts, train_data);
    if (eval->parsed()) return cmd_eval(eval_opts, eval_data, eval_ckpt);
    if (sweep->parsed())
      return cmd_noise_sweep(sweep_opts, sweep_data, sweep_sparse, sweep_vanilla, sweep_mode,
                             sweep_trials);
    if (ablate->parsed()) return cmd_ablate(ablate_opts, ablate_data, ablate_eval);
    if (attn->parsed())
      return cmd_export_attn(attn_opts, attn_data, attn_ckpt, attn_index, attn_agent);
    if (grad->parsed())
      return report_checks(grad_opts, check_layer_gradients(resolve_config(grad_opts).seed),
                           "grad_check.txt");
    if (prop->parsed())
      return report_checks(prop_opts, run_property_checks(resolve_config(prop_opts).seed),
                           "prop_check.txt");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
