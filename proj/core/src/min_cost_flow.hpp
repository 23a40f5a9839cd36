#pragma once

#include "wregress/linalg.hpp"

namespace wregress::detail {

/// Exact solution of the dense transportation problem
///   min <cost, plan>  s.t.  plan 1 = supply, plan' 1 = demand, plan >= 0
/// by successive shortest augmenting paths with Dijkstra on reduced costs.
/// Supplies and demands are nonnegative reals with (nearly) equal totals.
Matrix solve_transportation(const Vector& supply, const Vector& demand, const Matrix& cost);

}  // namespace wregress::detail
