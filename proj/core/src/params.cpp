#include "lanecast/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lanecast {

Tensor ParamRegistry::add(const std::string& name, Tensor t) {
  for (const auto& [n, _] : items_)
    if (n == name) throw std::invalid_argument("params: duplicate parameter name '" + name + "'");
  t.set_requires_grad(true);
  items_.emplace_back(name, t);
  return t;
}

int64_t ParamRegistry::total_count() const {
  int64_t n = 0;
  for (const auto& [_, t] : items_) n += t.numel();
  return n;
}

Tensor* ParamRegistry::find(const std::string& name) {
  for (auto& [n, t] : items_)
    if (n == name) return &t;
  return nullptr;
}

void ParamRegistry::zero_grads() {
  for (auto& [_, t] : items_) t.zero_grad();
}

Tensor kaiming_uniform(Rng& rng, int64_t fan_in, std::vector<int64_t> shape) {
  Tensor t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in < 1 ? 1 : fan_in));
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

namespace {

constexpr char kMagic[8] = {'L', 'C', 'P', 'A', 'R', 'A', 'M', '\0'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
}

}  // namespace

void save_checkpoint(const ParamRegistry& reg, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  write_pod(os, kVersion);
  write_pod(os, static_cast<uint64_t>(reg.size()));
  for (size_t i = 0; i < reg.size(); ++i) {
    const std::string& name = reg.name(i);
    const Tensor& t = reg.tensor(i);
    write_pod(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(os, static_cast<uint32_t>(t.ndim()));
    for (int64_t d : t.shape()) write_pod(os, static_cast<int64_t>(d));
    os.write(reinterpret_cast<const char*>(t.data()),
             static_cast<std::streamsize>(t.numel() * static_cast<int64_t>(sizeof(double))));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

void load_checkpoint(ParamRegistry& reg, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: '" + path + "' is not a parameter file");
  uint32_t version = 0;
  read_pod(is, version);
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  uint64_t count = 0;
  read_pod(is, count);
  if (count != reg.size())
    throw std::runtime_error("checkpoint: holds " + std::to_string(count) + " tensors, model has " +
                             std::to_string(reg.size()));
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t name_len = 0;
    read_pod(is, name_len);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    uint32_t ndim = 0;
    read_pod(is, ndim);
    std::vector<int64_t> shape(ndim);
    for (uint32_t d = 0; d < ndim; ++d) read_pod(is, shape[d]);
    Tensor* dst = reg.find(name);
    if (!dst) throw std::runtime_error("checkpoint: unknown parameter '" + name + "'");
    if (dst->shape() != shape)
      throw std::runtime_error("checkpoint: shape mismatch for '" + name + "': file " +
                               detail::shape_str(shape) + " vs model " +
                               detail::shape_str(dst->shape()));
    is.read(reinterpret_cast<char*>(dst->data()),
            static_cast<std::streamsize>(dst->numel() * static_cast<int64_t>(sizeof(double))));
    if (!is) throw std::runtime_error("checkpoint: truncated payload for '" + name + "'");
  }
}

}  // namespace lanecast
