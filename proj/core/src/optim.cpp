#include "lanecast/optim.hpp"

#include <cmath>

namespace lanecast {

Adam::Adam(ParamRegistry& reg, AdamConfig cfg) : reg_(reg), cfg_(cfg) {
  m_.resize(reg.size());
  v_.resize(reg.size());
  for (size_t i = 0; i < reg.size(); ++i) {
    m_[i].assign(static_cast<size_t>(reg.tensor(i).numel()), 0.0);
    v_[i].assign(static_cast<size_t>(reg.tensor(i).numel()), 0.0);
  }
}

bool Adam::step() {
  if (m_.size() != reg_.size())
    throw std::runtime_error("adam: registry grew after optimizer construction");

  for (size_t i = 0; i < reg_.size(); ++i) {
    const Tensor& p = reg_.tensor(i);
    if (!p.has_grad()) continue;
    const std::vector<double>& g = p.grad_buffer();
    for (double gv : g)
      if (!std::isfinite(gv)) {
        ++skipped_;
        return false;
      }
  }

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < reg_.size(); ++i) {
    Tensor& p = reg_.tensor(i);
    if (!p.has_grad()) continue;
    const std::vector<double>& g = p.grad_buffer();
    double* w = p.data();
    for (size_t j = 0; j < g.size(); ++j) {
      m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g[j];
      v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      w[j] -= cfg_.lr * (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + cfg_.eps);
    }
  }
  return true;
}

}  // namespace lanecast
