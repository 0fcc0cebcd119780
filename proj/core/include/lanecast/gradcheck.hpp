#pragma once

#include <functional>

#include "lanecast/rng.hpp"
#include "lanecast/tensor.hpp"

namespace lanecast {

struct GradCheckReport {
  double max_rel_error = 0.0;
  int64_t worst_coord = -1;
  bool all_finite = true;     // forward stayed finite at every probe
  int64_t bad_coord = -1;     // first coordinate with a non-finite probe
  int64_t coords_checked = 0;

  bool ok(double tol) const { return all_finite && max_rel_error <= tol; }
};

// f builds a scalar from x on the given tape. The analytic gradient comes
// from one reverse sweep; each probed coordinate is compared against the
// central difference (f(x+h) - f(x-h)) / 2h. Relative error is
// |ga - gn| / max(1, |ga|, |gn|). coord_ok can exclude coordinates that sit
// on a known kink of f (e.g. a penalty corner).
GradCheckReport finite_difference_check(
    const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& x, double step,
    int64_t n_coords, Rng& rng, const std::function<bool(int64_t)>& coord_ok = {});

}  // namespace lanecast
