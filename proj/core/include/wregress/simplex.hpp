#pragma once

#include <cstddef>
#include <vector>

namespace wregress {

/// Equality-form linear program  min c'x  s.t.  A x = b, x >= 0,
/// with A stored column-wise (compressed sparse columns).
struct SparseLinearProgram {
  std::size_t rows = 0;
  std::vector<double> rhs;
  std::vector<double> cost;
  std::vector<std::size_t> column_start{0};
  std::vector<std::size_t> row_index;
  std::vector<double> value;

  std::size_t columns() const { return cost.size(); }

  /// Appends a column; `entries` pairs row indices with coefficients.
  void add_column(double c, const std::vector<std::pair<std::size_t, double>>& entries);
};

struct SimplexOptions {
  double feasibility_tolerance = 1e-9;
  double optimality_tolerance = 1e-11;
  double pivot_tolerance = 1e-9;
  std::size_t refactor_interval = 64;
  std::size_t max_iterations = 5'000'000;
};

struct SimplexResult {
  std::vector<double> x;
  double objective = 0.0;
  std::size_t iterations = 0;
};

/// Two-phase revised simplex with an explicit dense basis inverse.
/// Redundant equality rows are tolerated. Throws InfeasibleError when no
/// feasible point exists and NumericalError on an unbounded ray or when the
/// iteration limit is hit.
SimplexResult solve_simplex(const SparseLinearProgram& lp, const SimplexOptions& opts = {});

}  // namespace wregress
