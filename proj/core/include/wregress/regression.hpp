#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "wregress/measures.hpp"
#include "wregress/mmot.hpp"

namespace wregress {

struct TimedMeasure {
  double t = 0.0;
  DiscreteMeasure measure;
};

/// Time-indexed discrete measures of a common dimension. Timestamps may
/// repeat, come unsorted, or fall outside [0, 1].
class TimedDataset {
 public:
  explicit TimedDataset(std::vector<TimedMeasure> entries);

  const std::vector<TimedMeasure>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  Eigen::Index dim() const { return entries_.front().measure.dim(); }

  std::vector<double> times() const;
  std::vector<DiscreteMeasure> measures() const;
  std::size_t distinct_times() const;

 private:
  std::vector<TimedMeasure> entries_;
};

/// Least-squares line through time-stamped points: minimizes
/// (1/N) sum_i ||(1 - t_i) x0 + t_i x1 - y_i||^2 over (x0, x1).
struct LineFit {
  double cost = 0.0;
  Vector x0;
  Vector x1;
};

/// Precomputes the 2x2 normal-equation pseudo-inverse for a fixed set of
/// timestamps so that many point tuples can be fit cheaply. With fewer than
/// two distinct timestamps the minimal-norm solution is returned.
class LineFitter {
 public:
  explicit LineFitter(std::vector<double> times);

  LineFit fit(std::span<const Vector> ys) const;
  /// Same fit with y_i taken as row idx[i] of supports[i].
  LineFit fit(std::span<const Matrix* const> supports, std::span<const std::size_t> idx) const;

  const std::vector<double>& times() const { return times_; }

 private:
  std::vector<double> times_;
  Eigen::Matrix2d gram_pinv_;
};

LineFit residual_cost(std::span<const double> ts, std::span<const Vector> ys);

enum class SolverKind { kExact, kEntropic };

struct SolverConfig {
  SolverKind kind = SolverKind::kExact;
  ExactOptions exact;
  EntropicOptions entropic;

  static SolverConfig exact_lp() { return {}; }
  static SolverConfig entropic_with(double epsilon) {
    SolverConfig c;
    c.kind = SolverKind::kEntropic;
    c.entropic.epsilon = epsilon;
    return c;
  }
};

/// A tuple (one atom per data measure) carrying positive mass in the plan,
/// together with its least-squares line.
struct SupportTuple {
  std::vector<std::size_t> index;
  double weight = 0.0;
  Vector x0;
  Vector x1;
};

struct SolverReport {
  SolverKind kind = SolverKind::kExact;
  std::size_t iterations = 0;
  bool converged = true;
  double max_violation = 0.0;
};

struct RegressionResult {
  DiscreteEndpointLaw pi;
  double cost = 0.0;
  MultimarginalPlan plan;
  std::vector<SupportTuple> support;  ///< per-tuple LS map, aligned with pi's atoms
  SolverReport report;
};

/// Solves the reduced multimarginal problem for fixed timestamps. The line
/// law is the image of the optimal plan under the per-tuple LS fit.
/// No check on the number of distinct timestamps.
RegressionResult solve_line_law(const std::vector<DiscreteMeasure>& measures,
                                std::span<const double> times, const SolverConfig& solver,
                                const std::vector<PairwiseConstraint>& pairwise = {});

/// Measure-valued least-squares regression. Requires at least two distinct
/// timestamps (DegenerateTimestampsError otherwise).
RegressionResult fit_regression(const TimedDataset& dataset, const SolverConfig& solver = {},
                                const std::vector<PairwiseConstraint>& pairwise = {});

/// F(pi) = (1/N) sum_i W2^2(((1 - t_i) x0 + t_i x1)_# pi, mu_i).
double regression_objective(const DiscreteEndpointLaw& pi, const TimedDataset& dataset);

/// Displacement interpolation between two endpoint laws viewed as measures on R^{2d}.
DiscreteEndpointLaw displacement_interpolate(const DiscreteEndpointLaw& a,
                                             const DiscreteEndpointLaw& b, double s);

struct ConvexityProbe {
  std::vector<std::pair<double, double>> values;  ///< (s, F(pi_s))
  bool is_convex = true;
  /// Grid index k of the first interior point with F(s_k) > (F(s_{k-1}) + F(s_{k+1})) / 2 + 1e-9.
  std::optional<std::size_t> first_violation;
};

ConvexityProbe nonconvexity_probe(const DiscreteEndpointLaw& a, const DiscreteEndpointLaw& b,
                                  const TimedDataset& dataset, std::size_t grid_size);

/// The two endpoint laws and single observation on which F fails to be
/// displacement convex: F(pi_s) = min(2.5 s^2, 2.5 s^2 - 3 s + 1).
struct NonconvexityFixture {
  DiscreteEndpointLaw start;
  DiscreteEndpointLaw end;
  TimedDataset data;
};
NonconvexityFixture displacement_counterexample();

struct PathSample {
  Vector x0;
  Vector x1;
  double likelihood = 0.0;
};

/// i.i.d. endpoint draws. Likelihood is the atom weight (discrete) or the
/// normal density at the draw (Gaussian; pseudo-determinant density on the
/// support when the covariance is singular).
std::vector<PathSample> sample_paths(const EndpointLaw& pi, std::size_t n, std::uint64_t seed);

/// max over consecutive grid pairs of W2(g_s, g_t) / ((t - s) sqrt(c)),
/// c = E||x1 - x0||^2. Returns 0 when c vanishes.
double ac_bound_check(const EndpointLaw& pi, std::span<const double> grid);

}  // namespace wregress
