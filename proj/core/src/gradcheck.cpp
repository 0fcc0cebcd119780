#include "lanecast/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lanecast {

namespace {

Tensor clone_values(const Tensor& x) {
  return Tensor(x.shape(), std::vector<double>(x.values()));
}

}  // namespace

GradCheckReport finite_difference_check(const std::function<Tensor(Tape&, const Tensor&)>& f,
                                        const Tensor& x, double step, int64_t n_coords, Rng& rng,
                                        const std::function<bool(int64_t)>& coord_ok) {
  GradCheckReport report;

  // analytic gradient
  Tensor xg = clone_values(x);
  xg.set_requires_grad(true);
  Tape tape;
  Tensor y = f(tape, xg);
  if (y.numel() != 1)
    throw ShapeError("finite_difference_check: f must return a scalar, have " +
                     detail::shape_str(y.shape()));
  tape.backward(y);
  const std::vector<double> ga = xg.grad_buffer();

  // probe coordinates: all of them when few, otherwise a random subset
  const int64_t n = x.numel();
  std::vector<int64_t> coords;
  if (n_coords >= n) {
    coords.resize(static_cast<size_t>(n));
    std::iota(coords.begin(), coords.end(), 0);
  } else {
    std::vector<int64_t> all(static_cast<size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    for (int64_t i = 0; i < n_coords; ++i) {
      const int64_t j = i + rng.randint(n - i);
      std::swap(all[static_cast<size_t>(i)], all[static_cast<size_t>(j)]);
    }
    coords.assign(all.begin(), all.begin() + static_cast<int64_t>(n_coords));
  }

  for (int64_t c : coords) {
    if (coord_ok && !coord_ok(c)) continue;
    double plus = 0.0, minus = 0.0;
    {
      Tensor xp = clone_values(x);
      xp.values()[static_cast<size_t>(c)] += step;
      Tape t(false);
      plus = f(t, xp).value();
    }
    {
      Tensor xm = clone_values(x);
      xm.values()[static_cast<size_t>(c)] -= step;
      Tape t(false);
      minus = f(t, xm).value();
    }
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      report.all_finite = false;
      if (report.bad_coord < 0) report.bad_coord = c;
      continue;
    }
    const double gn = (plus - minus) / (2.0 * step);
    const double g = ga[static_cast<size_t>(c)];
    const double rel = std::abs(g - gn) / std::max({1.0, std::abs(g), std::abs(gn)});
    ++report.coords_checked;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coord = c;
    }
  }
  return report;
}

}  // namespace lanecast
