#pragma once

#include <string>
#include <vector>

#include "lanecast/rng.hpp"
#include "lanecast/tensor.hpp"

namespace lanecast {

// Flat, ordered collection of named parameters. Registration order is the
// iteration order everywhere (optimizer state, checkpoints), so construction
// must be deterministic.
class ParamRegistry {
 public:
  Tensor add(const std::string& name, Tensor t);

  size_t size() const { return items_.size(); }
  int64_t total_count() const;

  const std::string& name(size_t i) const { return items_[i].first; }
  Tensor& tensor(size_t i) { return items_[i].second; }
  const Tensor& tensor(size_t i) const { return items_[i].second; }

  Tensor* find(const std::string& name);
  void zero_grads();

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

// Kaiming-uniform fan-in initialization for a weight matrix [fan_in, fan_out].
Tensor kaiming_uniform(Rng& rng, int64_t fan_in, std::vector<int64_t> shape);

// Binary parameter container: (name, shape, row-major float64 payload) per
// entry; round-trips bit exactly.
void save_checkpoint(const ParamRegistry& reg, const std::string& path);
void load_checkpoint(ParamRegistry& reg, const std::string& path);

}  // namespace lanecast
