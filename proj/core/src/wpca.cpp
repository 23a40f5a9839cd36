#include "wregress/wpca.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wregress/errors.hpp"

namespace wregress {

namespace {

constexpr double kDegenerateLength = 1e-14;

Vector atom(const DiscreteMeasure& m, std::size_t k) {
  return m.points().row(static_cast<Eigen::Index>(k)).transpose();
}

}  // namespace

double line_objective(std::span<const SupportTuple> support,
                      const std::vector<DiscreteMeasure>& measures, std::span<const double> times) {
  if (times.size() != measures.size()) throw DimensionError("line_objective: size mismatch");
  double total = 0.0;
  for (const auto& s : support) {
    for (std::size_t i = 0; i < measures.size(); ++i) {
      const double t = times[i];
      total += s.weight * ((1.0 - t) * s.x0 + t * s.x1 - atom(measures[i], s.index[i])).squaredNorm();
    }
  }
  return total / static_cast<double>(measures.size());
}

std::vector<double> update_times(std::span<const SupportTuple> support,
                                 const std::vector<DiscreteMeasure>& measures) {
  double den = 0.0;
  std::vector<double> num(measures.size(), 0.0);
  for (const auto& s : support) {
    const Vector dir = s.x1 - s.x0;
    den += s.weight * dir.squaredNorm();
    for (std::size_t i = 0; i < measures.size(); ++i) {
      num[i] += s.weight * (atom(measures[i], s.index[i]) - s.x0).dot(dir);
    }
  }
  std::vector<double> t(measures.size(), 0.0);
  if (den < kDegenerateLength) return t;
  for (std::size_t i = 0; i < measures.size(); ++i) t[i] = num[i] / den;
  return t;
}

std::vector<double> initial_times(const std::vector<DiscreteMeasure>& measures) {
  const std::size_t n = measures.size();
  const Eigen::Index d = measures.front().dim();
  Matrix means(static_cast<Eigen::Index>(n), d);
  for (std::size_t i = 0; i < n; ++i) means.row(static_cast<Eigen::Index>(i)) = measures[i].mean().transpose();
  const Vector centre = means.colwise().mean().transpose();
  const Matrix centred = means.rowwise() - centre.transpose();
  const Eigen::SelfAdjointEigenSolver<Matrix> es(centred.transpose() * centred);
  Vector axis = es.eigenvectors().col(d - 1);
  // Fix the sign so the result does not depend on the eigensolver.
  Eigen::Index lead = 0;
  axis.cwiseAbs().maxCoeff(&lead);
  if (axis[lead] < 0.0) axis = -axis;

  const Vector proj = centred * axis;
  const double lo = proj.minCoeff(), hi = proj.maxCoeff();
  std::vector<double> t(n);
  const double scale = std::max(1.0, centred.cwiseAbs().maxCoeff());
  if (hi - lo <= 1e-12 * scale) {
    for (std::size_t i = 0; i < n; ++i) {
      t[i] = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    }
    return t;
  }
  for (std::size_t i = 0; i < n; ++i) t[i] = (proj[static_cast<Eigen::Index>(i)] - lo) / (hi - lo);
  return t;
}

PcaState fit_pca(const std::vector<DiscreteMeasure>& measures, const PcaOptions& opts) {
  if (measures.size() < 2) throw EmptyMeasureError("fit_pca needs at least two measures");
  std::vector<double> times = opts.init ? *opts.init : initial_times(measures);
  if (times.size() != measures.size()) {
    throw DimensionError("fit_pca: initial times do not match the number of measures");
  }
  PcaState state{times, solve_line_law(measures, times, opts.solver), 0.0, 0, false, {}, {}};

  for (std::size_t sweep = 0; sweep < std::max<std::size_t>(1, opts.max_iterations); ++sweep) {
    if (sweep > 0) state.law = solve_line_law(measures, state.times, opts.solver);
    const double after_plan = line_objective(state.law.support, measures, state.times);
    state.half_step_trace.push_back(after_plan);

    state.times = update_times(state.law.support, measures);
    const double after_times = line_objective(state.law.support, measures, state.times);
    state.half_step_trace.push_back(after_times);
    state.objective_trace.push_back(after_times);
    state.objective = after_times;
    state.iteration = sweep + 1;

    if (sweep > 0) {
      const double previous = state.objective_trace[sweep - 1];
      if (previous - after_times < opts.tolerance) {
        state.converged = true;
        break;
      }
    }
  }
  return state;
}

double pca_objective(const PcaState& state, const std::vector<DiscreteMeasure>& measures) {
  return line_objective(state.law.support, measures, state.times);
}

}  // namespace wregress
