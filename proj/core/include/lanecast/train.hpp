#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lanecast/losses.hpp"
#include "lanecast/model.hpp"
#include "lanecast/optim.hpp"

namespace lanecast {

// FNV-1a, 64 bit; content hashing for run manifests.
uint64_t fnv1a64(const void* data, size_t n);
uint64_t fnv1a64_file(const std::string& path);

struct TrainConfig {
  ModelConfig model;
  LossConfig loss;
  std::string variant = "full";
  double lr = 1e-3;
  int64_t batch_size = 8;
  int64_t steps = 500;
  uint64_t seed = 0;
};

// Flat JSON object, unknown keys rejected; absent keys keep their defaults.
TrainConfig load_train_config(const std::string& path);
std::string train_config_json(const TrainConfig& cfg);

struct RunManifest {
  std::string config_json;
  uint64_t seed = 0;
  uint64_t data_hash = 0;  // fnv1a64 over the dataset file bytes
  std::vector<std::string> outputs;
};

void save_manifest(const RunManifest& m, const std::string& path);

struct TrainResult {
  int64_t steps_done = 0;
  int64_t steps_skipped = 0;  // non-finite gradients
  double initial_loss = 0.0;
  double final_loss = 0.0;
  bool diverged = false;
  std::vector<double> curve;  // total J per step
};

// Owns the registry, the model (built deterministically from the seed and
// the variant-adjusted config) and the optimizer state.
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);

  // Shuffled mini-batch descent over the whole set; one log line per step
  // when `log` is given. On a non-finite total the parameters revert to the
  // state that produced the last finite loss and training aborts.
  TrainResult run(const std::vector<Scenario>& data, std::ostream* log = nullptr);

  ParamRegistry& params() { return reg_; }
  const ParamRegistry& params() const { return reg_; }
  const HolisticModel& model() const { return *model_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  TrainConfig cfg_;
  ParamRegistry reg_;
  std::optional<HolisticModel> model_;
};

}  // namespace lanecast
