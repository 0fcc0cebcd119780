#include <benchmark/benchmark.h>

#include "lanecast/encoder.hpp"
#include "lanecast/generator.hpp"
#include "lanecast/model.hpp"
#include "lanecast/ops.hpp"
#include "lanecast/rng.hpp"

using namespace lanecast;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.normal();
  return t;
}

}  // namespace

static void BM_matmul(benchmark::State& state) {
  const int64_t n = state.range(0);
  Rng rng(1);
  Tensor a = random_tensor({n, n}, rng), b = random_tensor({n, n}, rng);
  for (auto _ : state) {
    Tape tape(false);
    benchmark::DoNotOptimize(matmul(tape, a, b));
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_matmul)->Arg(32)->Arg(64)->Arg(128);

static void BM_attention_forward(benchmark::State& state) {
  const bool vanilla = state.range(0) != 0;
  Rng rng(2);
  ParamRegistry reg;
  AttentionConfig cfg;
  cfg.d_model = 64;
  cfg.n_heads = 4;
  cfg.select_ratio = 0.75;
  cfg.vanilla = vanilla;
  SparseAttention att(reg, "bench", rng, cfg);
  Tensor x = random_tensor({20, 64}, rng);
  for (auto _ : state) {
    Tape tape(false);
    benchmark::DoNotOptimize(att.forward(tape, x, x));
  }
}
BENCHMARK(BM_attention_forward)->Arg(0)->Arg(1);  // 0 = sparse, 1 = dense

static void BM_attention_backward(benchmark::State& state) {
  Rng rng(3);
  ParamRegistry reg;
  AttentionConfig cfg;
  cfg.d_model = 64;
  cfg.n_heads = 4;
  SparseAttention att(reg, "bench", rng, cfg);
  Tensor x = random_tensor({20, 64}, rng);
  for (auto _ : state) {
    Tape tape;
    Tensor y = att.forward(tape, x, x);
    Tensor loss = reduce_sum_all(tape, mul(tape, y, y));
    tape.backward(loss);
    reg.zero_grads();
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_attention_backward);

static void BM_lane_conv(benchmark::State& state) {
  Rng rng(4);
  GenConfig gc;
  gc.fixed_map = static_cast<int>(MapKind::kCrossing);
  Scenario s = generate_scenario(11, gc);
  ParamRegistry reg;
  LaneConvStack stack(reg, "bench", rng, 32, 4, {1, 2});
  Tensor x = random_tensor({s.graph.size(), 32}, rng);
  for (auto _ : state) {
    Tape tape(false);
    benchmark::DoNotOptimize(stack.forward(tape, x, s.graph));
  }
}
BENCHMARK(BM_lane_conv);

static void BM_scenario_generation(benchmark::State& state) {
  GenConfig gc;
  uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_scenario(seed++, gc));
  }
}
BENCHMARK(BM_scenario_generation);

static void BM_model_forward(benchmark::State& state) {
  Rng rng(5);
  ParamRegistry reg;
  ModelConfig cfg;
  cfg.d_model = 32;
  cfg.n_heads = 4;
  cfg.nx_blocks = 2;
  cfg.ng_blocks = 2;
  cfg.na_blocks = 1;
  HolisticModel model(reg, rng, cfg);
  GenConfig gc;
  Scenario local = to_local_frame(generate_scenario(3, gc));
  SceneInputs in = featurize(local, cfg.t_hst, cfg.t_fut);
  for (auto _ : state) {
    Tape tape(false);
    benchmark::DoNotOptimize(model.forward(tape, in, local.graph));
  }
}
BENCHMARK(BM_model_forward);

static void BM_train_step(benchmark::State& state) {
  Rng rng(6);
  ParamRegistry reg;
  ModelConfig cfg;
  cfg.d_model = 32;
  cfg.n_heads = 4;
  cfg.nx_blocks = 2;
  cfg.ng_blocks = 2;
  cfg.na_blocks = 1;
  HolisticModel model(reg, rng, cfg);
  GenConfig gc;
  Scenario local = to_local_frame(generate_scenario(3, gc));
  SceneInputs in = featurize(local, cfg.t_hst, cfg.t_fut);
  LossConfig lc;
  for (auto _ : state) {
    Tape tape;
    auto out = model.forward(tape, in, local.graph);
    auto losses = compute_losses(tape, out.dec, out.lane_weights, in.targets, lc);
    tape.backward(losses.total);
    reg.zero_grads();
    benchmark::DoNotOptimize(losses.total);
  }
}
BENCHMARK(BM_train_step);

BENCHMARK_MAIN();
