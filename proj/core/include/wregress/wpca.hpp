#pragma once

#include <optional>
#include <span>
#include <vector>

#include "wregress/regression.hpp"

namespace wregress {

struct PcaOptions {
  /// Starting timestamps; by default the projections of the measure means on
  /// their first principal axis, rescaled to [0, 1].
  std::optional<std::vector<double>> init;
  double tolerance = 1e-10;
  std::size_t max_iterations = 100;
  SolverConfig solver;
};

struct PcaState {
  std::vector<double> times;
  RegressionResult law;  ///< plan, line law pi and per-tuple lines
  double objective = 0.0;
  std::size_t iteration = 0;
  bool converged = false;
  std::vector<double> objective_trace;   ///< after every full sweep
  std::vector<double> half_step_trace;   ///< after every plan solve and time update
};

/// (1/N) sum_i sum_tuples w ||(1 - t_i) x0 + t_i x1 - y_i||^2 with the
/// tuples' fitted lines held fixed.
double line_objective(std::span<const SupportTuple> support,
                      const std::vector<DiscreteMeasure>& measures, std::span<const double> times);

/// Closed-form optimal timestamps for fixed plan and lines:
///   t_i = E<y_i - x0, x1 - x0> / E||x1 - x0||^2, or 0 if the denominator < 1e-14.
std::vector<double> update_times(std::span<const SupportTuple> support,
                                 const std::vector<DiscreteMeasure>& measures);

/// Default initialization (see PcaOptions::init).
std::vector<double> initial_times(const std::vector<DiscreteMeasure>& measures);

/// First principal line of a family of measures by coordinate descent
/// between the plan solve and the timestamp update.
PcaState fit_pca(const std::vector<DiscreteMeasure>& measures, const PcaOptions& opts = {});

double pca_objective(const PcaState& state, const std::vector<DiscreteMeasure>& measures);

}  // namespace wregress
