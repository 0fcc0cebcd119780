#include "lanecast/losses.hpp"

#include <stdexcept>
#include <string>

namespace lanecast {

namespace {

constexpr double kProbFloor = 1e-12;

// per-row column pick: [m, n] with one column index per row -> [m, 1]
Tensor pick_cols(Tape& tape, const Tensor& x, const std::vector<int64_t>& cols) {
  const int64_t m = x.rows(), n = x.cols();
  std::vector<int64_t> flat(static_cast<size_t>(m));
  for (int64_t i = 0; i < m; ++i) {
    if (cols[static_cast<size_t>(i)] < 0 || cols[static_cast<size_t>(i)] >= n)
      throw ShapeError("pick_cols: column " + std::to_string(cols[static_cast<size_t>(i)]) +
                       " out of " + std::to_string(n));
    flat[static_cast<size_t>(i)] = i * n + cols[static_cast<size_t>(i)];
  }
  return index_select_rows(tape, reshape(tape, x, {m * n, 1}), flat);
}

}  // namespace

std::vector<int64_t> argmax_modes(const Tensor& traj_probs) {
  const int64_t a = traj_probs.rows(), k = traj_probs.cols();
  std::vector<int64_t> best(static_cast<size_t>(a), 0);
  for (int64_t i = 0; i < a; ++i) {
    const double* row = traj_probs.data() + i * k;
    int64_t arg = 0;
    for (int64_t j = 1; j < k; ++j)
      if (row[j] > row[arg]) arg = j;
    best[static_cast<size_t>(i)] = arg;
  }
  return best;
}

LossBreakdown compute_losses(Tape& tape, const DecoderOutput& out, const Tensor& lane_weights,
                             const LossTargets& targets, const LossConfig& cfg) {
  const int64_t a = out.traj_probs.rows(), k = out.traj_probs.cols();
  const int64_t t_steps2 = out.deltas.cols();
  if (a < 1) throw std::invalid_argument("losses: no agents");
  if (targets.future_deltas.rows() != a || targets.future_deltas.cols() != t_steps2)
    throw ShapeError("losses: target displacements " + std::to_string(targets.future_deltas.rows()) +
                     "x" + std::to_string(targets.future_deltas.cols()) + " vs predicted " +
                     std::to_string(a) + "x" + std::to_string(t_steps2));
  if (static_cast<int64_t>(targets.maneuvers.size()) != a)
    throw ShapeError("losses: " + std::to_string(targets.maneuvers.size()) + " maneuver labels for " +
                     std::to_string(a) + " agents");

  const std::vector<int64_t> k_star = argmax_modes(out.traj_probs);

  // mode separation: every other mode must trail the leader by the margin
  Tensor margin;
  if (k == 1) {
    margin = Tensor::scalar(0.0);
  } else {
    const Tensor p_star = pick_cols(tape, out.traj_probs, k_star);
    Tensor gaps = relu(tape, add_scalar(tape, sub_colvec(tape, out.traj_probs, p_star), cfg.margin));
    Tensor mask({a, k});  // drop the leader's own (always-positive) entry
    for (int64_t i = 0; i < a; ++i)
      for (int64_t j = 0; j < k; ++j)
        mask.data()[i * k + j] = (j == k_star[static_cast<size_t>(i)]) ? 0.0 : 1.0;
    margin = scalar_mul(tape, reduce_sum_all(tape, mul(tape, gaps, mask)),
                        1.0 / static_cast<double>(a * (k - 1)));
  }

  // leading-mode confidence
  const Tensor p_star_safe =
      clamp(tape, pick_cols(tape, out.traj_probs, k_star), kProbFloor, 1.0);
  const Tensor traj_ce = scalar_mul(tape, reduce_sum_all(tape, log_elem(tape, p_star_safe)),
                                    -1.0 / static_cast<double>(a));

  // displacement regression on the leading mode
  std::vector<int64_t> star_rows(static_cast<size_t>(a));
  for (int64_t i = 0; i < a; ++i) star_rows[static_cast<size_t>(i)] = i * k + k_star[static_cast<size_t>(i)];
  const Tensor pred_star = index_select_rows(tape, out.deltas, star_rows);
  const Tensor diff =
      reshape(tape, sub(tape, pred_star, targets.future_deltas), {a * (t_steps2 / 2), 2});
  const Tensor smooth = scalar_mul(tape, smooth_l1_sum(tape, diff),
                                   1.0 / static_cast<double>(a * (t_steps2 / 2)));

  // lane occupancy, scored only when the lane head ran
  Tensor lane_ce;
  if (lane_weights.numel() == 0) {
    lane_ce = Tensor::scalar(0.0);
  } else {
    const int64_t nl = lane_weights.cols();
    if (targets.lane_hits.rows() != a || targets.lane_hits.cols() != nl)
      throw ShapeError("losses: lane targets " + std::to_string(targets.lane_hits.rows()) + "x" +
                       std::to_string(targets.lane_hits.cols()) + " vs weights " +
                       std::to_string(a) + "x" + std::to_string(nl));
    const Tensor p = clamp(tape, lane_weights, kProbFloor, 1.0 - kProbFloor);
    const Tensor q = add_scalar(tape, scalar_mul(tape, p, -1.0), 1.0);
    Tensor ones_minus_d({a, nl});
    for (int64_t i = 0; i < a * nl; ++i)
      ones_minus_d.data()[i] = 1.0 - targets.lane_hits.data()[i];
    const Tensor ce = add(tape, mul(tape, targets.lane_hits, log_elem(tape, p)),
                          mul(tape, ones_minus_d, log_elem(tape, q)));
    lane_ce = scalar_mul(tape, reduce_sum_all(tape, ce), -1.0 / static_cast<double>(a * nl));
  }

  // maneuver classification, skipped when that head did not run
  Tensor agent_ce;
  if (out.maneuver_probs.numel() == 0) {
    agent_ce = Tensor::scalar(0.0);
  } else {
    std::vector<int64_t> man_cols(targets.maneuvers.begin(), targets.maneuvers.end());
    const Tensor p_man =
        clamp(tape, pick_cols(tape, out.maneuver_probs, man_cols), kProbFloor, 1.0);
    agent_ce = scalar_mul(tape, reduce_sum_all(tape, log_elem(tape, p_man)),
                          -1.0 / static_cast<double>(a));
  }

  Tensor total = scalar_mul(tape, margin, cfg.w_margin);
  total = add(tape, total, scalar_mul(tape, traj_ce, cfg.w_traj));
  total = add(tape, total, scalar_mul(tape, smooth, cfg.w_smooth));
  total = add(tape, total, scalar_mul(tape, lane_ce, cfg.w_lane));
  total = add(tape, total, scalar_mul(tape, agent_ce, cfg.w_agent));

  return {margin, traj_ce, smooth, lane_ce, agent_ce, total};
}

}  // namespace lanecast
