#include "lanecast/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lanecast/losses.hpp"

namespace lanecast {

std::vector<std::array<double, 2>> unroll_deltas(const double* deltas, int64_t t_fut, double ax,
                                                 double ay) {
  std::vector<std::array<double, 2>> pos(static_cast<size_t>(t_fut));
  double x = ax, y = ay;
  for (int64_t t = 0; t < t_fut; ++t) {
    x += deltas[2 * t];
    y += deltas[2 * t + 1];
    pos[static_cast<size_t>(t)] = {x, y};
  }
  return pos;
}

bool is_yield(Maneuver m) {
  return m == Maneuver::kStop || m == Maneuver::kNudge || m == Maneuver::kDecelerate;
}

namespace {

struct ModeError {
  double ade = 0.0;
  double fde = 0.0;
};

ModeError mode_error(const double* deltas, int64_t t_fut, double ax, double ay,
                     const std::vector<std::array<double, 2>>& future) {
  const std::vector<std::array<double, 2>> pos = unroll_deltas(deltas, t_fut, ax, ay);
  ModeError err;
  for (int64_t t = 0; t < t_fut; ++t) {
    const double d = std::hypot(pos[static_cast<size_t>(t)][0] - future[static_cast<size_t>(t)][0],
                                pos[static_cast<size_t>(t)][1] - future[static_cast<size_t>(t)][1]);
    err.ade += d;
    if (t == t_fut - 1) err.fde = d;
  }
  err.ade /= static_cast<double>(t_fut);
  return err;
}

ClassScore score_from_counts(int64_t tp, int64_t fp, int64_t fn) {
  ClassScore s;
  s.support = tp + fn;
  s.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

}  // namespace

void MetricsAccumulator::add_trajectories(
    const Tensor& deltas, const Tensor& traj_probs,
    const std::vector<std::array<double, 2>>& anchors,
    const std::vector<std::vector<std::array<double, 2>>>& futures) {
  const int64_t a = traj_probs.rows(), k = traj_probs.cols();
  if (deltas.rows() != a * k)
    throw ShapeError("metrics: " + std::to_string(deltas.rows()) + " mode rows for " +
                     std::to_string(a) + " agents x " + std::to_string(k) + " modes");
  if (static_cast<int64_t>(anchors.size()) != a || static_cast<int64_t>(futures.size()) != a)
    throw ShapeError("metrics: anchor/future counts do not cover all agents");
  const int64_t t_fut = deltas.cols() / 2;

  const std::vector<int64_t> k_star = argmax_modes(traj_probs);
  for (int64_t i = 0; i < a; ++i) {
    const std::vector<std::array<double, 2>>& future = futures[static_cast<size_t>(i)];
    if (static_cast<int64_t>(future.size()) != t_fut) {
      ++traj_skipped_;
      continue;
    }
    double best_ade = 0.0, best_fde = 0.0;
    for (int64_t m = 0; m < k; ++m) {
      const ModeError err =
          mode_error(deltas.data() + (i * k + m) * t_fut * 2, t_fut,
                     anchors[static_cast<size_t>(i)][0], anchors[static_cast<size_t>(i)][1], future);
      if (m == 0 || err.ade < best_ade) best_ade = err.ade;
      if (m == 0 || err.fde < best_fde) best_fde = err.fde;
      if (m == k_star[static_cast<size_t>(i)]) {
        sum_ade_k1_ += err.ade;
        sum_fde_k1_ += err.fde;
      }
    }
    sum_ade_k_ += best_ade;
    sum_fde_k_ += best_fde;
    ++traj_agents_;
  }
}

void MetricsAccumulator::add_maneuvers(const Tensor& maneuver_probs,
                                       const std::vector<Maneuver>& labels) {
  const int64_t a = maneuver_probs.rows();
  if (maneuver_probs.cols() != 6)
    throw ShapeError("metrics: maneuver head width " + std::to_string(maneuver_probs.cols()));
  if (static_cast<int64_t>(labels.size()) != a)
    throw ShapeError("metrics: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(a) + " agents");
  const std::vector<int64_t> pred = argmax_modes(maneuver_probs);
  for (int64_t i = 0; i < a; ++i)
    ++confusion_[static_cast<size_t>(labels[static_cast<size_t>(i)])]
                [static_cast<size_t>(pred[static_cast<size_t>(i)])];
}

void MetricsAccumulator::add_lanes(const Tensor& lane_weights, const Tensor& lane_hits) {
  if (lane_weights.numel() == 0) return;
  const int64_t a = lane_weights.rows(), nl = lane_weights.cols();
  if (lane_hits.rows() != a || lane_hits.cols() != nl)
    throw ShapeError("metrics: lane occupancy shape mismatch");
  for (int64_t i = 0; i < a; ++i) {
    bool any_true = false, any_found = false;
    for (int64_t j = 0; j < nl; ++j) {
      const bool predicted = lane_weights.data()[i * nl + j] >= 0.5;
      const bool truth = lane_hits.data()[i * nl + j] != 0.0;
      ++lane_cells_;
      if (predicted == truth) ++lane_cells_correct_;
      if (truth) {
        any_true = true;
        if (predicted) any_found = true;
      }
    }
    if (any_true) {
      ++lane_cases_;
      if (any_found) ++lane_cases_hit_;
    }
  }
}

TrajectoryMetrics MetricsAccumulator::trajectory() const {
  TrajectoryMetrics m;
  m.n_agents = traj_agents_;
  m.n_skipped = traj_skipped_;
  if (traj_agents_ > 0) {
    const double n = static_cast<double>(traj_agents_);
    m.min_ade_k1 = sum_ade_k1_ / n;
    m.min_fde_k1 = sum_fde_k1_ / n;
    m.min_ade_k = sum_ade_k_ / n;
    m.min_fde_k = sum_fde_k_ / n;
  }
  return m;
}

ManeuverMetrics MetricsAccumulator::maneuver() const {
  ManeuverMetrics m;
  int64_t total = 0, correct = 0;
  for (size_t c = 0; c < 6; ++c) {
    int64_t tp = confusion_[c][c], fp = 0, fn = 0;
    for (size_t o = 0; o < 6; ++o) {
      total += confusion_[c][o];
      if (o != c) {
        fn += confusion_[c][o];
        fp += confusion_[o][c];
      }
    }
    correct += tp;
    m.per_class[c] = score_from_counts(tp, fp, fn);
  }

  int64_t ytp = 0, yfp = 0, yfn = 0;
  for (size_t t = 0; t < 6; ++t) {
    for (size_t p = 0; p < 6; ++p) {
      const bool truth = is_yield(static_cast<Maneuver>(t));
      const bool pred = is_yield(static_cast<Maneuver>(p));
      if (truth && pred) ytp += confusion_[t][p];
      if (!truth && pred) yfp += confusion_[t][p];
      if (truth && !pred) yfn += confusion_[t][p];
    }
  }
  m.yield = score_from_counts(ytp, yfp, yfn);
  m.accuracy = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  m.n_agents = total;
  return m;
}

LaneMetrics MetricsAccumulator::lane() const {
  LaneMetrics m;
  m.n_cells = lane_cells_;
  m.n_cases = lane_cases_;
  m.cell_accuracy =
      lane_cells_ > 0 ? static_cast<double>(lane_cells_correct_) / static_cast<double>(lane_cells_)
                      : 0.0;
  m.case_recall =
      lane_cases_ > 0 ? static_cast<double>(lane_cases_hit_) / static_cast<double>(lane_cases_)
                      : 0.0;
  return m;
}

}  // namespace lanecast
