#include "lanecast/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "lanecast/generator.hpp"
#include "lanecast/gradcheck.hpp"
#include "lanecast/ops.hpp"

namespace lanecast {

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

uint64_t mix(uint64_t a, uint64_t b) {
  a ^= b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2);
  return a;
}

}  // namespace

// --- evaluation ------------------------------------------------------------

EvalSummary evaluate_model(const HolisticModel& model, const std::vector<Scenario>& data) {
  const ModelConfig& cfg = model.config();
  MetricsAccumulator acc;
  for (const Scenario& s : data) {
    const SceneInputs in = featurize(s, cfg.t_hst, cfg.t_fut);
    Tape tape(false);
    const HolisticModel::Output out = model.forward(tape, in, s.graph);
    acc.add_trajectories(out.dec.deltas, out.dec.traj_probs, in.anchors, in.futures);
    if (out.dec.maneuver_probs.numel() > 0)
      acc.add_maneuvers(out.dec.maneuver_probs, s.maneuver_labels);
    if (out.lane_weights.numel() > 0) acc.add_lanes(out.lane_weights, in.targets.lane_hits);
  }
  return {acc.trajectory(), acc.maneuver(), acc.lane()};
}

namespace {

const char* kClassNames[6] = {"stop", "nudge", "decelerate", "follow", "ignore", "unknown"};

void class_rows(std::ostringstream& os, const std::string& name, const ClassScore& c) {
  os << name << "_precision," << fmt(c.precision) << "\n";
  os << name << "_recall," << fmt(c.recall) << "\n";
  os << name << "_f1," << fmt(c.f1) << "\n";
  os << name << "_support," << c.support << "\n";
}

}  // namespace

std::string metrics_csv(const EvalSummary& s) {
  std::ostringstream os;
  os << "metric,value\n";
  os << "min_ade_k1," << fmt(s.traj.min_ade_k1) << "\n";
  os << "min_fde_k1," << fmt(s.traj.min_fde_k1) << "\n";
  os << "min_ade_k," << fmt(s.traj.min_ade_k) << "\n";
  os << "min_fde_k," << fmt(s.traj.min_fde_k) << "\n";
  os << "traj_agents," << s.traj.n_agents << "\n";
  os << "traj_skipped," << s.traj.n_skipped << "\n";
  os << "maneuver_accuracy," << fmt(s.man.accuracy) << "\n";
  os << "maneuver_agents," << s.man.n_agents << "\n";
  for (int c = 0; c < 6; ++c) class_rows(os, kClassNames[c], s.man.per_class[static_cast<size_t>(c)]);
  class_rows(os, "yield", s.man.yield);
  os << "lane_cell_accuracy," << fmt(s.lane.cell_accuracy) << "\n";
  os << "lane_case_recall," << fmt(s.lane.case_recall) << "\n";
  os << "lane_cells," << s.lane.n_cells << "\n";
  os << "lane_cases," << s.lane.n_cases << "\n";
  return os.str();
}

std::string metrics_text(const EvalSummary& s) {
  std::ostringstream os;
  os << std::setprecision(6);
  os << "trajectories: " << s.traj.n_agents << " agents (" << s.traj.n_skipped << " skipped)\n";
  os << "  minADE " << s.traj.min_ade_k << "  minFDE " << s.traj.min_fde_k
     << "  (best of K)\n";
  os << "  minADE " << s.traj.min_ade_k1 << "  minFDE " << s.traj.min_fde_k1
     << "  (leading mode)\n";
  if (s.man.n_agents > 0) {
    os << "maneuvers: accuracy " << s.man.accuracy << " over " << s.man.n_agents << " agents\n";
    for (int c = 0; c < 6; ++c) {
      const ClassScore& cs = s.man.per_class[static_cast<size_t>(c)];
      os << "  " << std::setw(10) << kClassNames[c] << "  P " << cs.precision << "  R "
         << cs.recall << "  F1 " << cs.f1 << "  n=" << cs.support << "\n";
    }
    os << "  " << std::setw(10) << "yield" << "  P " << s.man.yield.precision << "  R "
       << s.man.yield.recall << "  F1 " << s.man.yield.f1 << "  n=" << s.man.yield.support
       << "\n";
  }
  if (s.lane.n_cells > 0) {
    os << "lanes: cell accuracy " << s.lane.cell_accuracy << " (" << s.lane.n_cells
       << " cells), case recall " << s.lane.case_recall << " (" << s.lane.n_cases << " cases)\n";
  }
  return os.str();
}

// --- noise robustness sweep ---------------------------------------------------

std::vector<NoiseCell> noise_sweep(const HolisticModel& sparse_model,
                                   const HolisticModel& vanilla_model,
                                   const std::vector<Scenario>& eval_set,
                                   const std::vector<double>& probabilities, NoiseSpec::Mode mode,
                                   int trials, uint64_t seed) {
  if (eval_set.empty()) throw std::invalid_argument("noise_sweep: empty eval set");
  if (trials < 1) throw std::invalid_argument("noise_sweep: need at least one trial");

  std::vector<NoiseCell> cells;
  const HolisticModel* models[2] = {&sparse_model, &vanilla_model};
  const char* names[2] = {"sparse", "vanilla"};
  for (int m = 0; m < 2; ++m) {
    double base_fde = 0.0;
    for (size_t pi = 0; pi < probabilities.size(); ++pi) {
      const double p = probabilities[pi];
      NoiseCell cell;
      cell.model = names[m];
      cell.probability = p;
      std::vector<double> ades, fdes;
      for (int t = 0; t < trials; ++t) {
        EvalSummary summary;
        if (p == 0.0) {
          summary = evaluate_model(*models[m], eval_set);
        } else {
          NoiseSpec spec;
          spec.mode = mode;
          spec.probability = p;
          std::vector<Scenario> noisy;
          noisy.reserve(eval_set.size());
          // noise keyed by (probability, trial, scenario), not by model, so
          // both models face the same corrupted copies
          for (size_t i = 0; i < eval_set.size(); ++i)
            noisy.push_back(inject_noise(eval_set[i], spec,
                                         mix(mix(mix(seed, pi), static_cast<uint64_t>(t)),
                                             static_cast<uint64_t>(i))));
          summary = evaluate_model(*models[m], noisy);
        }
        ades.push_back(summary.traj.min_ade_k);
        fdes.push_back(summary.traj.min_fde_k);
      }
      auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
      };
      auto var_of = [&](const std::vector<double>& v, double mu) {
        double s = 0.0;
        for (double x : v) s += (x - mu) * (x - mu);
        return s / static_cast<double>(v.size());
      };
      cell.mean_ade = mean_of(ades);
      cell.var_ade = var_of(ades, cell.mean_ade);
      cell.mean_fde = mean_of(fdes);
      cell.var_fde = var_of(fdes, cell.mean_fde);
      if (pi == 0) base_fde = cell.mean_fde;
      cell.fde_increment = cell.mean_fde - base_fde;
      cell.fde_increment_ratio = base_fde != 0.0 ? cell.fde_increment / base_fde : 0.0;
      cells.push_back(cell);
    }
  }
  return cells;
}

std::string noise_sweep_csv(const std::vector<NoiseCell>& cells) {
  std::ostringstream os;
  os << "model,probability,mean_min_ade,var_min_ade,mean_min_fde,var_min_fde,"
        "fde_increment,fde_increment_ratio\n";
  for (const NoiseCell& c : cells)
    os << c.model << "," << fmt(c.probability) << "," << fmt(c.mean_ade) << ","
       << fmt(c.var_ade) << "," << fmt(c.mean_fde) << "," << fmt(c.var_fde) << ","
       << fmt(c.fde_increment) << "," << fmt(c.fde_increment_ratio) << "\n";
  return os.str();
}

// --- ablation driver ------------------------------------------------------------

std::vector<AblationRow> run_ablations(const TrainConfig& base,
                                       const std::vector<Scenario>& train_set,
                                       const std::vector<Scenario>& eval_set, std::ostream* log) {
  std::vector<AblationRow> rows;
  for (Variant v : all_variants()) {
    TrainConfig cfg = base;
    cfg.variant = variant_name(v);
    if (log) *log << "== variant " << cfg.variant << "\n";
    Trainer trainer(cfg);
    trainer.run(train_set, log);
    const EvalSummary s = evaluate_model(trainer.model(), eval_set);
    AblationRow row;
    row.variant = cfg.variant;
    row.params = trainer.params().total_count();
    row.min_ade_k1 = s.traj.min_ade_k1;
    row.min_fde_k1 = s.traj.min_fde_k1;
    row.min_ade_k = s.traj.min_ade_k;
    row.min_fde_k = s.traj.min_fde_k;
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os << "variant,params,min_ade_k1,min_fde_k1,min_ade_k,min_fde_k\n";
  for (const AblationRow& r : rows)
    os << r.variant << "," << r.params << "," << fmt(r.min_ade_k1) << "," << fmt(r.min_fde_k1)
       << "," << fmt(r.min_ade_k) << "," << fmt(r.min_fde_k) << "\n";
  return os.str();
}

// --- attention export -------------------------------------------------------------

std::string attention_csv(const Tensor& lane_weights) {
  if (lane_weights.numel() == 0)
    throw std::runtime_error("attention export: the model emitted no lane attention weights");
  std::ostringstream os;
  os << "agent,lane,weight\n";
  for (int64_t i = 0; i < lane_weights.rows(); ++i)
    for (int64_t v = 0; v < lane_weights.cols(); ++v)
      os << i << "," << v << "," << fmt(lane_weights.data()[i * lane_weights.cols() + v]) << "\n";
  return os.str();
}

namespace {

struct Bounds {
  double minx = 1e300, miny = 1e300, maxx = -1e300, maxy = -1e300;
  void eat(double x, double y) {
    minx = std::min(minx, x);
    miny = std::min(miny, y);
    maxx = std::max(maxx, x);
    maxy = std::max(maxy, y);
  }
};

std::string ramp_color(double t) {
  const int r = static_cast<int>(std::lround(255.0 * t));
  const int b = 255 - r;
  std::ostringstream os;
  os << "rgb(" << r << ",0," << b << ")";
  return os.str();
}

}  // namespace

std::string attention_svg(const Scenario& local, const HolisticModel::Output& out,
                          const std::vector<std::array<double, 2>>& anchors,
                          const std::vector<std::vector<std::array<double, 2>>>& futures,
                          int64_t agent) {
  const Tensor& w = out.lane_weights;
  if (w.numel() == 0)
    throw std::runtime_error("attention export: the model emitted no lane attention weights");
  if (agent < 0 || agent >= w.rows())
    throw std::invalid_argument("attention export: agent index out of range");
  if (w.cols() != local.graph.size())
    throw ShapeError("attention export: weight columns do not match the lane graph");

  Bounds bb;
  for (const LaneVector& v : local.graph.vectors) {
    bb.eat(v.start_x, v.start_y);
    bb.eat(v.end_x, v.end_y);
  }
  for (const auto& a : anchors) bb.eat(a[0], a[1]);
  for (const auto& f : futures)
    for (const auto& p : f) bb.eat(p[0], p[1]);

  const std::vector<int64_t> stars = argmax_modes(out.dec.traj_probs);
  const int64_t k_modes = out.dec.traj_probs.cols();
  const int64_t t_fut = out.dec.deltas.cols() / 2;
  const std::vector<std::array<double, 2>> pred =
      unroll_deltas(out.dec.deltas.data() +
                        (agent * k_modes + stars[static_cast<size_t>(agent)]) * t_fut * 2,
                    t_fut, anchors[static_cast<size_t>(agent)][0],
                    anchors[static_cast<size_t>(agent)][1]);
  for (const auto& p : pred) bb.eat(p[0], p[1]);

  const double pad = 5.0;
  const double span_x = std::max(bb.maxx - bb.minx, 1e-6) + 2.0 * pad;
  const double span_y = std::max(bb.maxy - bb.miny, 1e-6) + 2.0 * pad;
  const double width = 800.0;
  const double scale = width / span_x;
  const double height = span_y * scale;
  auto sx = [&](double x) { return (x - bb.minx + pad) * scale; };
  auto sy = [&](double y) { return height - (y - bb.miny + pad) * scale; };

  double wmin = 1e300, wmax = -1e300;
  for (int64_t v = 0; v < w.cols(); ++v) {
    const double val = w.data()[agent * w.cols() + v];
    wmin = std::min(wmin, val);
    wmax = std::max(wmax, val);
  }
  const double wspan = wmax - wmin;

  std::ostringstream os;
  os << std::setprecision(8);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << " " << height
     << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (int64_t v = 0; v < local.graph.size(); ++v) {
    const LaneVector& lv = local.graph.vectors[static_cast<size_t>(v)];
    const double val = w.data()[agent * w.cols() + v];
    const double t = wspan > 0.0 ? (val - wmin) / wspan : 0.5;
    os << "<line x1=\"" << sx(lv.start_x) << "\" y1=\"" << sy(lv.start_y) << "\" x2=\""
       << sx(lv.end_x) << "\" y2=\"" << sy(lv.end_y) << "\" stroke=\"" << ramp_color(t)
       << "\" stroke-width=\"3\" stroke-linecap=\"round\"/>\n";
  }

  auto polyline = [&](const std::vector<std::array<double, 2>>& pts, const char* style) {
    if (pts.empty()) return;
    os << "<polyline fill=\"none\" " << style << " points=\"";
    for (const auto& p : pts) os << sx(p[0]) << "," << sy(p[1]) << " ";
    os << "\"/>\n";
  };
  for (size_t i = 0; i < futures.size(); ++i)
    polyline(futures[i], static_cast<int64_t>(i) == agent
                             ? "stroke=\"#1a7f1a\" stroke-width=\"2\""
                             : "stroke=\"#9a9a9a\" stroke-width=\"1.5\"");
  polyline(pred, "stroke=\"#d617d6\" stroke-width=\"2\" stroke-dasharray=\"6 4\"");

  for (size_t i = 0; i < anchors.size(); ++i)
    os << "<circle cx=\"" << sx(anchors[i][0]) << "\" cy=\"" << sy(anchors[i][1])
       << "\" r=\"4\" fill=\"" << (static_cast<int64_t>(i) == agent ? "#d61717" : "#222222")
       << "\"/>\n";

  os << "</svg>\n";
  return os.str();
}

// --- property suites -----------------------------------------------------------

PropertyCheck check_sparse_full_equivalence(uint64_t seed) {
  PropertyCheck pc;
  pc.name = "sparse_full_equivalence";

  AttentionConfig cfg;
  cfg.d_model = 128;
  cfg.n_heads = 4;
  cfg.select_ratio = 1.0;
  AttentionConfig dense = cfg;
  dense.vanilla = true;

  ParamRegistry r1, r2;
  Rng g1(seed), g2(seed);
  const SparseAttention keep_all(r1, "a", g1, cfg);
  const SparseAttention full(r2, "a", g2, dense);

  Rng data(mix(seed, 1));
  const int64_t L = 20;
  for (int rep = 0; rep < 100; ++rep) {
    Tensor x({L, cfg.d_model});
    for (int64_t i = 0; i < x.numel(); ++i) x.data()[i] = data.normal();
    Tape tape(false);
    const Tensor ya = keep_all.forward(tape, x, x);
    const Tensor yb = full.forward(tape, x, x);
    double diff = 0.0;
    for (int64_t i = 0; i < ya.numel(); ++i)
      diff = std::max(diff, std::abs(ya.data()[i] - yb.data()[i]));
    pc.worst = std::max(pc.worst, diff);
    ++pc.total;
    if (diff <= 1e-6) ++pc.passed;
  }
  pc.ok = pc.passed == pc.total;
  return pc;
}

PropertyCheck check_kl_bound(uint64_t seed) {
  PropertyCheck pc;
  pc.name = "kl_uniform_bound";
  pc.worst = -1e300;  // most positive violation margin; negative means slack

  Rng rng(seed);
  for (int64_t L : {5, 20}) {
    for (int64_t d : {4, 16}) {
      for (int rep = 0; rep < 1000; ++rep) {
        std::vector<double> q(static_cast<size_t>(d)), row(static_cast<size_t>(L));
        for (double& v : q) v = rng.normal();
        for (int64_t j = 0; j < L; ++j) {
          double dot = 0.0;
          for (int64_t c = 0; c < d; ++c) dot += q[static_cast<size_t>(c)] * rng.normal();
          row[static_cast<size_t>(j)] = dot / std::sqrt(static_cast<double>(d));
        }
        const double kl = kl_from_uniform(row);
        const double m =
            *std::max_element(row.begin(), row.end()) -
            std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(L);
        const double violation = std::max(-kl, kl - m);
        pc.worst = std::max(pc.worst, violation);
        ++pc.total;
        if (violation <= 1e-9) ++pc.passed;
      }
    }
  }
  pc.ok = pc.passed == pc.total;
  return pc;
}

PropertyCheck check_entropy_bound(uint64_t seed) {
  PropertyCheck pc;
  pc.name = "entropy_bound";
  pc.worst = -1e300;

  Rng rng(seed);
  for (int64_t L : {3, 10, 50}) {
    const double log_l = std::log(static_cast<double>(L));
    for (int rep = 0; rep < 1000; ++rep) {
      // normalized unit exponentials: uniform on the simplex
      std::vector<double> q(static_cast<size_t>(L));
      double sum = 0.0;
      for (double& v : q) {
        v = -std::log(1.0 - rng.uniform());
        sum += v;
      }
      for (double& v : q) v /= sum;
      const double excess = entropy(q) - log_l;
      pc.worst = std::max(pc.worst, excess);
      ++pc.total;
      if (excess <= 1e-12) ++pc.passed;
    }
    // the uniform point attains the bound
    const std::vector<double> uni(static_cast<size_t>(L), 1.0 / static_cast<double>(L));
    ++pc.total;
    if (std::abs(entropy(uni) - log_l) <= 1e-9) ++pc.passed;
  }
  pc.ok = pc.passed == pc.total;
  return pc;
}

namespace {

Tensor randn(Rng& rng, std::vector<int64_t> shape, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = scale * rng.normal();
  return t;
}

Tensor softmax_values(Rng& rng, int64_t m, int64_t n) {
  Tensor t({m, n});
  for (int64_t i = 0; i < m; ++i) {
    double mx = -1e300;
    for (int64_t j = 0; j < n; ++j) {
      t.data()[i * n + j] = rng.normal();
      mx = std::max(mx, t.data()[i * n + j]);
    }
    double sum = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      t.data()[i * n + j] = std::exp(t.data()[i * n + j] - mx);
      sum += t.data()[i * n + j];
    }
    for (int64_t j = 0; j < n; ++j) t.data()[i * n + j] /= sum;
  }
  return t;
}

PropertyCheck grad_check(const std::string& name, uint64_t seed,
                         const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& x) {
  PropertyCheck pc;
  pc.name = "grad_" + name;
  Rng pick(seed);
  const GradCheckReport rep = finite_difference_check(f, x, 1e-5, 100, pick);
  pc.total = rep.coords_checked;
  pc.ok = rep.ok(1e-3);
  pc.passed = pc.ok ? pc.total : 0;
  pc.worst = rep.max_rel_error;
  return pc;
}

Tensor sum_squares(Tape& tape, const Tensor& y) { return reduce_sum_all(tape, mul(tape, y, y)); }

}  // namespace

std::vector<PropertyCheck> check_layer_gradients(uint64_t seed) {
  std::vector<PropertyCheck> out;
  Rng rng(seed);

  {
    ParamRegistry reg;
    AttentionConfig cfg;
    cfg.d_model = 16;
    cfg.n_heads = 2;
    cfg.select_ratio = 0.6;
    const SparseAttention attn(reg, "a", rng, cfg);
    const Tensor x = randn(rng, {8, 16});
    out.push_back(grad_check("attention", mix(seed, 11),
                             [&](Tape& t, const Tensor& v) {
                               return sum_squares(t, attn.forward(t, v, v));
                             },
                             x));
  }
  {
    ParamRegistry reg;
    const ConvPool pool(reg, "cp", rng, 16);
    const Tensor x = randn(rng, {9, 16});
    out.push_back(grad_check("conv_pool", mix(seed, 12),
                             [&](Tape& t, const Tensor& v) {
                               return sum_squares(t, pool.forward(t, v));
                             },
                             x));
  }
  {
    Rng map_rng(mix(seed, 13));
    const LaneGraph graph = build_lane_graph(make_map(MapKind::kCrossing, map_rng), 10.0, 2.5);
    ParamRegistry reg;
    const LaneConvBlock block(reg, "lc", rng, 24, {1, 2});
    const Tensor x = randn(rng, {graph.size(), 24});
    out.push_back(grad_check("lane_conv", mix(seed, 14),
                             [&](Tape& t, const Tensor& v) {
                               return sum_squares(t, block.forward(t, v, graph));
                             },
                             x));
  }
  {
    ParamRegistry reg;
    const FeatureSelectionBlock block(reg, "fs", rng, 16);
    const Tensor base = randn(rng, {7, 16});
    const Tensor ctx = randn(rng, {5, 16});
    std::vector<ToiPair> pairs;
    for (int32_t i = 0; i < 7; ++i)
      pairs.push_back({i, static_cast<int32_t>(i % 5), rng.normal(), rng.normal()});
    out.push_back(grad_check("feature_selection", mix(seed, 15),
                             [&](Tape& t, const Tensor& v) {
                               return sum_squares(t, block.forward(t, v, ctx, pairs).fused);
                             },
                             base));
  }
  {
    ParamRegistry reg;
    const SigmoidLaneAttention att(reg, "sl", rng, 16);
    const Tensor agents = randn(rng, {7, 16});
    const Tensor lanes = randn(rng, {6, 16});
    out.push_back(grad_check("lane_attention", mix(seed, 16),
                             [&](Tape& t, const Tensor& v) {
                               const LaneAttentionResult r = att.forward(t, v, lanes);
                               return add(t, sum_squares(t, r.fused), sum_squares(t, r.weights));
                             },
                             agents));
  }
  {
    ParamRegistry reg;
    DecoderConfig cfg;
    cfg.d_model = 16;
    cfg.k_modes = 3;
    cfg.t_fut = 5;
    const Decoder dec(reg, "dec", rng, cfg);
    const Tensor x = randn(rng, {7, 16});
    const Tensor att_l = randn(rng, {7, 16});
    const Tensor att_a = randn(rng, {7, 16});
    out.push_back(grad_check("decoder", mix(seed, 17),
                             [&](Tape& t, const Tensor& v) {
                               const DecoderOutput o = dec.forward(t, v, att_l, att_a);
                               Tensor s = sum_squares(t, o.deltas);
                               s = add(t, s, sum_squares(t, o.traj_probs));
                               s = add(t, s, sum_squares(t, o.maneuver_probs));
                               return s;
                             },
                             x));
  }

  // the five loss terms, each against its own input on a shared synthetic
  // prediction set: A = 17 agents, K = 6 modes, 10 future steps, 6 lanes
  const int64_t a = 17, k = 6, t_fut = 10, nl = 6;
  LossTargets targets;
  targets.future_deltas = randn(rng, {a, t_fut * 2}, 0.7);
  for (int64_t i = 0; i < a; ++i) targets.maneuvers.push_back(static_cast<int>(rng.randint(6)));
  targets.lane_hits = Tensor({a, nl});
  for (int64_t i = 0; i < targets.lane_hits.numel(); ++i)
    targets.lane_hits.data()[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;

  const Tensor deltas = randn(rng, {a * k, t_fut * 2}, 0.7);
  const Tensor endpoints = Tensor({a * k, 2});
  const Tensor traj_probs = softmax_values(rng, a, k);
  const Tensor man_probs = softmax_values(rng, a, 6);
  Tensor lane_w({a, nl});
  for (int64_t i = 0; i < lane_w.numel(); ++i) lane_w.data()[i] = rng.uniform(0.1, 0.9);

  auto loss_cfg = [](double wm, double wt, double ws, double wl, double wa) {
    LossConfig c;
    c.w_margin = wm;
    c.w_traj = wt;
    c.w_smooth = ws;
    c.w_lane = wl;
    c.w_agent = wa;
    return c;
  };
  auto loss_total = [&](Tape& t, const Tensor& d, const Tensor& tp, const Tensor& mp,
                        const Tensor& lw, const LossConfig& c) {
    const DecoderOutput o{d, endpoints, tp, mp};
    return compute_losses(t, o, lw, targets, c).total;
  };

  out.push_back(grad_check("loss_margin", mix(seed, 18),
                           [&](Tape& t, const Tensor& v) {
                             return loss_total(t, deltas, v, man_probs, lane_w,
                                               loss_cfg(1, 0, 0, 0, 0));
                           },
                           traj_probs));
  out.push_back(grad_check("loss_traj", mix(seed, 19),
                           [&](Tape& t, const Tensor& v) {
                             return loss_total(t, deltas, v, man_probs, lane_w,
                                               loss_cfg(0, 1, 0, 0, 0));
                           },
                           traj_probs));
  out.push_back(grad_check("loss_smooth", mix(seed, 20),
                           [&](Tape& t, const Tensor& v) {
                             return loss_total(t, v, traj_probs, man_probs, lane_w,
                                               loss_cfg(0, 0, 1, 0, 0));
                           },
                           deltas));
  out.push_back(grad_check("loss_lane", mix(seed, 21),
                           [&](Tape& t, const Tensor& v) {
                             return loss_total(t, deltas, traj_probs, man_probs, v,
                                               loss_cfg(0, 0, 0, 1, 0));
                           },
                           lane_w));
  out.push_back(grad_check("loss_agent", mix(seed, 22),
                           [&](Tape& t, const Tensor& v) {
                             return loss_total(t, deltas, traj_probs, v, lane_w,
                                               loss_cfg(0, 0, 0, 0, 1));
                           },
                           man_probs));
  return out;
}

std::vector<PropertyCheck> run_property_checks(uint64_t seed) {
  std::vector<PropertyCheck> out;
  out.push_back(check_sparse_full_equivalence(seed));
  out.push_back(check_kl_bound(mix(seed, 2)));
  out.push_back(check_entropy_bound(mix(seed, 3)));
  for (PropertyCheck& pc : check_layer_gradients(mix(seed, 4))) out.push_back(std::move(pc));
  return out;
}

std::string property_report(const std::vector<PropertyCheck>& checks) {
  std::ostringstream os;
  for (const PropertyCheck& pc : checks)
    os << (pc.ok ? "PASS" : "FAIL") << "  " << std::left << std::setw(28) << pc.name
       << std::right << " " << pc.passed << "/" << pc.total << "  worst "
       << std::setprecision(3) << std::scientific << pc.worst << std::defaultfloat << "\n";
  return os.str();
}

bool properties_ok(const std::vector<PropertyCheck>& checks) {
  for (const PropertyCheck& pc : checks)
    if (!pc.ok) return false;
  return true;
}

}  // namespace lanecast
