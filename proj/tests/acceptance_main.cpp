// End-to-end acceptance gate. Each numbered criterion prints one PASS/FAIL
// line; the process exits non-zero if any of them fail. Runs the cheap
// property suites first, then the training-based checks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "lanecast/experiments.hpp"
#include "lanecast/generator.hpp"
#include "lanecast/model.hpp"
#include "lanecast/train.hpp"
#include "support/maneuver_oracle.hpp"

using namespace lanecast;

namespace {

int g_failures = 0;

void report(int number, const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  %2d %-38s %s\n", ok ? "PASS" : "FAIL", number, name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

uint64_t mix(uint64_t a, uint64_t b) {
  a ^= b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2);
  return a;
}

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}

// ---- 1-4: property suites ---------------------------------------------------

void criterion_equivalence() {
  PropertyCheck c = check_sparse_full_equivalence(1001);
  report(1, "sparse/full attention equivalence",
         c.ok && c.total == 100, fmt("%g/100 inputs, worst |diff| %.3g", (double)c.passed, c.worst));
}

void criterion_kl() {
  PropertyCheck c = check_kl_bound(1002);
  report(2, "KL measurement bound", c.ok && c.total == 4000,
         fmt("%g/4000 draws in range, worst slack %.3g", (double)c.passed, c.worst));
}

void criterion_entropy() {
  PropertyCheck c = check_entropy_bound(1003);
  report(3, "entropy bound and uniform maximum", c.ok,
         fmt("%g/%g points", (double)c.passed, (double)c.total) +
             fmt(", worst excess %.3g", c.worst));
}

void criterion_gradients() {
  auto t0 = std::chrono::steady_clock::now();
  auto checks = check_layer_gradients(1004);
  bool ok = !checks.empty();
  double worst = 0.0;
  for (const auto& c : checks) {
    ok = ok && c.ok;
    worst = std::max(worst, c.worst);
  }
  report(4, "finite-difference gradient checks", ok,
         fmt("%g layer/loss suites, worst rel err %.3g", (double)checks.size(), worst) +
             fmt(", %.1fs", elapsed(t0)));
}

// ---- 5: overfit sanity ------------------------------------------------------

void criterion_overfit() {
  auto t0 = std::chrono::steady_clock::now();
  GenConfig gc;
  auto raw = generate_batch(7, 32, gc);
  std::vector<Scenario> data;
  for (const auto& s : raw) data.push_back(to_local_frame(s));

  TrainConfig tc;
  tc.variant = "full";
  tc.lr = 1e-3;
  tc.batch_size = 8;
  tc.steps = 2000;
  tc.seed = 7;
  tc.model.d_model = 32;
  tc.model.n_heads = 4;
  tc.model.nx_blocks = 2;
  tc.model.ng_blocks = 2;
  tc.model.na_blocks = 1;
  tc.model.k_modes = 6;

  Trainer trainer(tc);
  trainer.run(data, nullptr);
  EvalSummary ev = evaluate_model(trainer.model(), data);
  const bool ok = ev.traj.min_ade_k <= 0.5 && ev.man.accuracy >= 0.9;
  report(5, "overfit sanity (32 scenarios)", ok,
         fmt("minADE(K) %.3f (<= 0.5), accuracy %.3f (>= 0.9)", ev.traj.min_ade_k,
             ev.man.accuracy) +
             fmt(", %.0fs", elapsed(t0)));
}

// ---- 6: noise-robustness direction -------------------------------------------

double spearman_against_index(const std::vector<double>& y) {
  const size_t n = y.size();
  std::vector<double> rank(n);
  for (size_t i = 0; i < n; ++i) {
    double r = 1.0, ties = 1.0;
    for (size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (y[j] < y[i]) r += 1.0;
      if (y[j] == y[i]) ties += 1.0;
    }
    rank[i] = r + 0.5 * (ties - 1.0);
  }
  const double mx = (n + 1.0) / 2.0;
  double num = 0.0, dx = 0.0, dy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double a = (i + 1.0) - mx, b = rank[i] - mx;
    num += a * b;
    dx += a * a;
    dy += b * b;
  }
  return num / std::sqrt(dx * dy);
}

void criterion_noise_direction() {
  auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> probs{0.0, 0.01, 0.03, 0.05, 0.08};
  const std::vector<uint64_t> seeds{101, 202, 303};
  const int trials = 8;

  // shared training pool: every history carries gaussian corruption, the way
  // real perception data would, so both variants fit under the same noise
  GenConfig gc;
  auto raw = generate_batch(42, 64, gc);
  std::vector<Scenario> train_set;
  NoiseSpec train_noise{NoiseSpec::Mode::kGaussian, 0.08};
  for (size_t i = 0; i < raw.size(); ++i)
    train_set.push_back(to_local_frame(inject_noise(raw[i], train_noise, mix(42, i))));
  auto raw_eval = generate_batch(4242, 64, gc);
  std::vector<Scenario> eval_set;
  for (const auto& s : raw_eval) eval_set.push_back(to_local_frame(s));

  int sparse_wins = 0;
  std::vector<double> pooled_sparse(probs.size(), 0.0), pooled_vanilla(probs.size(), 0.0);
  for (uint64_t seed : seeds) {
    TrainConfig tc;
    tc.lr = 1e-3;
    tc.batch_size = 8;
    tc.steps = 800;
    tc.seed = seed;
    tc.model.d_model = 32;
    tc.model.n_heads = 4;
    tc.model.nx_blocks = 2;
    tc.model.ng_blocks = 2;
    tc.model.na_blocks = 1;
    tc.model.k_modes = 6;

    tc.variant = "full";
    Trainer sparse(tc);
    sparse.run(train_set, nullptr);
    tc.variant = "vanilla_attention";
    Trainer vanilla(tc);
    vanilla.run(train_set, nullptr);

    auto cells = noise_sweep(sparse.model(), vanilla.model(), eval_set, probs,
                             NoiseSpec::Mode::kGaussian, trials, mix(seed, 9));
    const size_t np = probs.size();
    if (cells[np - 1].fde_increment_ratio <= cells[2 * np - 1].fde_increment_ratio)
      ++sparse_wins;
    for (size_t i = 0; i < np; ++i) {
      pooled_sparse[i] += cells[i].mean_fde / double(seeds.size());
      pooled_vanilla[i] += cells[np + i].mean_fde / double(seeds.size());
    }
  }
  const double rho_s = spearman_against_index(pooled_sparse);
  const double rho_v = spearman_against_index(pooled_vanilla);
  const bool ok = sparse_wins >= 2 && rho_s >= 0.8 && rho_v >= 0.8;
  report(6, "noise-robustness direction", ok,
         fmt("sparse wins %g/3 seeds, spearman %.2f", (double)sparse_wins,
             std::min(rho_s, rho_v)) +
             fmt("/%.2f, %.0fs", std::max(rho_s, rho_v), elapsed(t0)));
}

// ---- 7: labeler oracle --------------------------------------------------------

void criterion_labeler() {
  GenConfig gc;
  int64_t agents = 0, mismatches = 0;
  for (uint64_t seed = 0; seed < 500; ++seed) {
    Scenario s = generate_scenario(mix(777, seed), gc);
    for (size_t i = 0; i < s.agents.size(); ++i) {
      ++agents;
      if (s.maneuver_labels[i] != oracle::classify(s, i, gc.rules)) ++mismatches;
    }
  }
  report(7, "maneuver labels match brute-force oracle", mismatches == 0,
         fmt("%g agents over 500 scenarios, %g mismatches", (double)agents, (double)mismatches));
}

// ---- 8: graph invariants --------------------------------------------------------

std::vector<std::vector<int32_t>> frontier_hops(const std::vector<std::vector<int32_t>>& one,
                                                int k) {
  // exact-k-hop reachability: k successive expansions of the one-hop relation
  std::vector<std::vector<int32_t>> cur = one;
  for (int step = 1; step < k; ++step) {
    std::vector<std::vector<int32_t>> next(cur.size());
    for (size_t v = 0; v < cur.size(); ++v) {
      std::set<int32_t> acc;
      for (int32_t w : cur[v])
        for (int32_t u : one[static_cast<size_t>(w)]) acc.insert(u);
      next[v].assign(acc.begin(), acc.end());
    }
    cur = std::move(next);
  }
  return cur;
}

void criterion_graph() {
  int64_t bad = 0, maps = 0;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    GenConfig gc;
    gc.fixed_map = static_cast<int>(seed % 5);
    const Scenario s = generate_scenario(mix(888, seed), gc);
    const LaneGraph& g = s.graph;
    const size_t n = static_cast<size_t>(g.size());
    ++maps;

    auto contains = [](const std::vector<int32_t>& v, int32_t x) {
      return std::binary_search(v.begin(), v.end(), x);
    };
    for (size_t v = 0; v < n; ++v) {
      for (int32_t u : g.merge[v]) {
        if (!contains(g.overlap[v], u)) ++bad;                          // merge within overlap
        if (!contains(g.merge[static_cast<size_t>(u)], (int32_t)v)) ++bad;  // symmetric
      }
      for (int32_t u : g.overlap[v])
        if (!contains(g.overlap[static_cast<size_t>(u)], (int32_t)v)) ++bad;
      // left/right: single-valued, in range, never the vector itself, and
      // always on a different lane
      for (int32_t u : {g.left[v], g.right[v]}) {
        if (u < 0) continue;
        if (u >= static_cast<int32_t>(n) || u == static_cast<int32_t>(v) ||
            g.vectors[static_cast<size_t>(u)].lane_id == g.vectors[v].lane_id)
          ++bad;
      }
    }
    for (int k = 1; k <= kMaxHops; ++k) {
      const auto want_pred = frontier_hops(g.pred[0], k);
      const auto want_succ = frontier_hops(g.succ[0], k);
      if (g.pred[static_cast<size_t>(k - 1)] != want_pred) ++bad;
      if (g.succ[static_cast<size_t>(k - 1)] != want_succ) ++bad;
      // the pair view must agree with the stored lists
      auto pairs = dilated_adjacency(g, k, true);
      size_t count = 0;
      for (size_t v = 0; v < n; ++v) count += want_pred[v].size();
      if (pairs.size() != count) ++bad;
      for (const auto& [v, u] : pairs)
        if (!contains(want_pred[static_cast<size_t>(v)], u)) ++bad;
    }
  }
  report(8, "lane-graph relation invariants", bad == 0,
         fmt("%g maps, %g violations", (double)maps, (double)bad));
}

// ---- 9: loss identities -----------------------------------------------------------

void criterion_losses() {
  bool ok = true;
  std::string detail;

  // smooth-L1 joins its quadratic and linear branches continuously
  const double delta = 1e-6;
  Tape tape(false);
  Tensor lo({1, 1}, {1.0 - delta}), hi({1, 1}, {1.0 + delta});
  const double f_lo = smooth_l1_sum(tape, lo).data()[0];
  const double f_hi = smooth_l1_sum(tape, hi).data()[0];
  const double corner = std::abs(f_hi - f_lo);
  ok = ok && corner <= 2.0 * delta;

  // satisfied margins cost exactly nothing; a uniform maneuver head costs
  // exactly log 6
  const int64_t a = 2, k = 3, t2 = 8;
  DecoderOutput out;
  out.traj_probs = Tensor({a, k}, {0.6, 0.25, 0.15, 0.7, 0.2, 0.1});
  out.deltas = Tensor::zeros({a * k, t2});
  out.endpoints = Tensor::zeros({a * k, 2});
  out.maneuver_probs = Tensor({a, 6}, std::vector<double>(a * 6, 1.0 / 6.0));
  LossTargets targets;
  targets.future_deltas = Tensor::zeros({a, t2});
  targets.maneuvers = {2, 4};
  LossConfig lc;
  lc.margin = 0.2;
  Tape t2ape(false);
  LossBreakdown lb = compute_losses(t2ape, out, Tensor(), targets, lc);
  const double margin_loss = lb.margin.data()[0];
  const double agent_gap = std::abs(lb.agent_ce.data()[0] - std::log(6.0));
  ok = ok && margin_loss == 0.0 && agent_gap <= 1e-9;

  report(9, "loss identities", ok,
         fmt("corner gap %.3g, margin %.3g", corner, margin_loss) +
             fmt(", |agent CE - log 6| %.3g", agent_gap));
}

// ---- 10: rigid-transform invariance --------------------------------------------

void criterion_invariance() {
  Rng rng(2024);
  GenConfig gc;
  double worst = 0.0;
  int64_t checked = 0;
  bool structure_ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    Scenario s = generate_scenario(mix(999, static_cast<uint64_t>(trial)), gc);

    const double th = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double tx = rng.uniform(-200.0, 200.0), ty = rng.uniform(-200.0, 200.0);
    const double c = std::cos(th), si = std::sin(th);
    auto rot = [&](std::array<double, 2> p) {
      return std::array<double, 2>{c * p[0] - si * p[1] + tx, si * p[0] + c * p[1] + ty};
    };

    Scenario moved = s;
    for (auto& lane : moved.map_lanes)
      for (auto& p : lane.points) p = rot(p);
    moved.graph = build_lane_graph(moved.map_lanes, moved.segment_length,
                                   moved.overlap_threshold);
    if (moved.graph.size() != s.graph.size()) {
      structure_ok = false;
      continue;
    }
    for (auto& agent : moved.agents) {
      const auto anchor = rot({agent.anchor_x, agent.anchor_y});
      agent.anchor_x = anchor[0];
      agent.anchor_y = anchor[1];
      for (auto& step : agent.history) {
        const double dx = c * step.dx - si * step.dy;
        const double dy = si * step.dx + c * step.dy;
        step.dx = dx;
        step.dy = dy;
      }
      for (auto& p : agent.future) p = rot(p);
    }

    const SceneInputs in_a = featurize(to_local_frame(s), gc.t_hst, gc.t_fut);
    const SceneInputs in_b = featurize(to_local_frame(moved), gc.t_hst, gc.t_fut);

    auto cmp = [&](const Tensor& x, const Tensor& y) {
      for (int64_t i = 0; i < x.numel(); ++i) {
        worst = std::max(worst, std::abs(x.data()[i] - y.data()[i]));
        ++checked;
      }
    };
    for (size_t i = 0; i < in_a.agent_steps.size(); ++i)
      cmp(in_a.agent_steps[i], in_b.agent_steps[i]);
    auto cmp_points = [&](const std::vector<std::array<double, 2>>& x,
                          const std::vector<std::array<double, 2>>& y) {
      for (size_t i = 0; i < x.size(); ++i)
        for (int d = 0; d < 2; ++d) {
          worst = std::max(worst, std::abs(x[i][d] - y[i][d]));
          ++checked;
        }
    };
    cmp_points(in_a.anchors, in_b.anchors);
    cmp(in_a.lane_feats, in_b.lane_feats);
    cmp_points(in_a.lane_mids, in_b.lane_mids);
    cmp(in_a.targets.future_deltas, in_b.targets.future_deltas);
    for (size_t i = 0; i < in_a.futures.size(); ++i)
      for (size_t t = 0; t < in_a.futures[i].size(); ++t)
        for (int d = 0; d < 2; ++d) {
          worst = std::max(worst, std::abs(in_a.futures[i][t][d] - in_b.futures[i][t][d]));
          ++checked;
        }
  }
  const bool ok = structure_ok && worst <= 1e-9;
  report(10, "rigid-transform invariance of inputs", ok,
         fmt("%g values compared, worst |diff| %.3g", (double)checked, worst) +
             (structure_ok ? "" : ", vector counts diverged"));
}

// ---- 11: reproducibility ------------------------------------------------------

void criterion_reproducibility() {
  auto t0 = std::chrono::steady_clock::now();
  GenConfig gc;
  auto raw = generate_batch(31, 24, gc);
  std::vector<Scenario> data;
  for (const auto& s : raw) data.push_back(to_local_frame(s));

  TrainConfig tc;
  tc.variant = "full";
  tc.lr = 1e-3;
  tc.batch_size = 4;
  tc.steps = 60;
  tc.seed = 17;
  tc.model.d_model = 16;
  tc.model.n_heads = 2;
  tc.model.k_modes = 3;
  tc.model.nx_blocks = 1;
  tc.model.ng_blocks = 1;
  tc.model.na_blocks = 1;
  tc.model.dilations = {1};

  auto run_once = [&]() {
    Trainer trainer(tc);
    trainer.run(data, nullptr);
    return metrics_csv(evaluate_model(trainer.model(), data));
  };
  const std::string manifest_a = train_config_json(tc), manifest_b = train_config_json(tc);
  const std::string csv_a = run_once(), csv_b = run_once();
  const bool ok = manifest_a == manifest_b && csv_a == csv_b && !csv_a.empty();
  report(11, "identical manifests, identical metrics", ok,
         fmt("%g metric bytes, %.0fs", (double)csv_a.size(), elapsed(t0)));
}

}  // namespace

int main() {
  auto t0 = std::chrono::steady_clock::now();
  criterion_equivalence();
  criterion_kl();
  criterion_entropy();
  criterion_gradients();
  criterion_labeler();
  criterion_graph();
  criterion_losses();
  criterion_invariance();
  criterion_reproducibility();
  criterion_overfit();
  criterion_noise_direction();
  std::printf("%d of 11 criteria failed, %.0fs total\n", g_failures, elapsed(t0));
  return g_failures == 0 ? 0 : 1;
}
