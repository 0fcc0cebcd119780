#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lanecast/metrics.hpp"
#include "lanecast/train.hpp"

namespace lanecast {

// --- evaluation ------------------------------------------------------------

struct EvalSummary {
  TrajectoryMetrics traj;
  ManeuverMetrics man;
  LaneMetrics lane;
};

// Forward pass over every scenario (no tape), metrics pooled. Decision
// metrics cover only the outputs the model variant emits.
EvalSummary evaluate_model(const HolisticModel& model, const std::vector<Scenario>& data);

// Fixed column schema, fixed float formatting; identical summaries serialize
// to identical bytes.
std::string metrics_csv(const EvalSummary& s);
std::string metrics_text(const EvalSummary& s);

// --- noise robustness sweep -------------------------------------------------

struct NoiseCell {
  std::string model;  // "sparse" or "vanilla"
  double probability = 0.0;
  double mean_ade = 0.0, var_ade = 0.0;
  double mean_fde = 0.0, var_fde = 0.0;
  double fde_increment = 0.0;        // mean minFDE minus the model's p = 0 mean
  double fde_increment_ratio = 0.0;  // increment over the p = 0 mean
};

// Evaluates both models on `trials` independently corrupted copies of the
// eval set per probability. Rows ordered: all sparse cells by probability,
// then all vanilla cells.
std::vector<NoiseCell> noise_sweep(const HolisticModel& sparse_model,
                                   const HolisticModel& vanilla_model,
                                   const std::vector<Scenario>& eval_set,
                                   const std::vector<double>& probabilities, NoiseSpec::Mode mode,
                                   int trials, uint64_t seed);
std::string noise_sweep_csv(const std::vector<NoiseCell>& cells);

// --- ablation driver ---------------------------------------------------------

struct AblationRow {
  std::string variant;
  int64_t params = 0;
  double min_ade_k1 = 0.0, min_fde_k1 = 0.0;
  double min_ade_k = 0.0, min_fde_k = 0.0;
};

// Trains every architecture variant from the same base config (same seed and
// data order) and evaluates each on the eval set.
std::vector<AblationRow> run_ablations(const TrainConfig& base,
                                       const std::vector<Scenario>& train_set,
                                       const std::vector<Scenario>& eval_set,
                                       std::ostream* log = nullptr);
std::string ablation_csv(const std::vector<AblationRow>& rows);

// --- attention export ---------------------------------------------------------

// One row per (agent, lane vector) pair.
std::string attention_csv(const Tensor& lane_weights);

// Map overlay: lane vectors colored red (max weight) to blue (min weight)
// for the chosen agent, ground-truth futures, the predicted best mode, and
// agent anchors.
std::string attention_svg(const Scenario& local, const HolisticModel::Output& out,
                          const std::vector<std::array<double, 2>>& anchors,
                          const std::vector<std::vector<std::array<double, 2>>>& futures,
                          int64_t agent = 0);

// --- property suites ----------------------------------------------------------

struct PropertyCheck {
  std::string name;
  int64_t passed = 0;
  int64_t total = 0;
  double worst = 0.0;  // suite-specific: worst deviation / error seen
  bool ok = false;
};

// Sparse attention with every query kept vs the dense path: max abs output
// difference <= 1e-6 on 100 random inputs (L = 20, d = 128).
PropertyCheck check_sparse_full_equivalence(uint64_t seed);

// Exact uniform-KL identity stays within [0, M] (1e-9 slack), 1000 draws per
// (L, d) in {5,20} x {4,16}.
PropertyCheck check_kl_bound(uint64_t seed);

// Entropy of 1000 random simplex points per L in {3,10,50} never exceeds
// log L (1e-12 slack); the uniform point achieves it within 1e-9.
PropertyCheck check_entropy_bound(uint64_t seed);

// Finite-difference pass over every layer and every loss term, step 1e-5,
// up to 100 coordinates each, relative error <= 1e-3.
std::vector<PropertyCheck> check_layer_gradients(uint64_t seed);

std::vector<PropertyCheck> run_property_checks(uint64_t seed);
std::string property_report(const std::vector<PropertyCheck>& checks);
bool properties_ok(const std::vector<PropertyCheck>& checks);

}  // namespace lanecast
