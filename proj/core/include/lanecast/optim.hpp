#pragma once

#include <cstdint>
#include <vector>

#include "lanecast/params.hpp"

namespace lanecast {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a parameter registry. State lives per
// parameter in registration order. A step whose gradients contain any
// non-finite value is skipped entirely (state and parameters untouched)
// and counted, so one bad batch cannot poison the moments.
class Adam {
 public:
  explicit Adam(ParamRegistry& reg, AdamConfig cfg = {});

  // Applies one update from the gradients currently in the registry.
  // Returns false when the step was skipped for non-finite gradients.
  bool step();

  int64_t steps_taken() const { return t_; }
  int64_t steps_skipped() const { return skipped_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }

 private:
  ParamRegistry& reg_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  int64_t t_ = 0;
  int64_t skipped_ = 0;
};

}  // namespace lanecast
