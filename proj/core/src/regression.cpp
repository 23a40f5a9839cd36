#include "wregress/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <string>

#include "wregress/errors.hpp"

namespace wregress {

// ---------------------------------------------------------------------------
// TimedDataset

TimedDataset::TimedDataset(std::vector<TimedMeasure> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw EmptyMeasureError("timed dataset has no entries");
  const Eigen::Index d = entries_.front().measure.dim();
  for (const auto& e : entries_) {
    if (e.measure.dim() != d) throw DimensionError("timed dataset: measures differ in dimension");
    if (!std::isfinite(e.t)) throw RangeError("timed dataset: non-finite timestamp");
  }
}

std::vector<double> TimedDataset::times() const {
  std::vector<double> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.t);
  return out;
}

std::vector<DiscreteMeasure> TimedDataset::measures() const {
  std::vector<DiscreteMeasure> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.measure);
  return out;
}

std::size_t TimedDataset::distinct_times() const {
  std::set<double> s;
  for (const auto& e : entries_) s.insert(e.t);
  return s.size();
}

// ---------------------------------------------------------------------------
// Line fits

LineFitter::LineFitter(std::vector<double> times) : times_(std::move(times)) {
  if (times_.empty()) throw EmptyMeasureError("line fit needs at least one timestamp");
  Eigen::Matrix2d gram = Eigen::Matrix2d::Zero();
  for (double t : times_) {
    const double a = 1.0 - t;
    gram(0, 0) += a * a;
    gram(0, 1) += a * t;
    gram(1, 1) += t * t;
  }
  gram(1, 0) = gram(0, 1);
  gram_pinv_ = linalg::sym_pinv(gram);
}

LineFit LineFitter::fit(std::span<const Vector> ys) const {
  if (ys.size() != times_.size()) throw DimensionError("line fit: times and points differ in count");
  const Eigen::Index d = ys.front().size();
  Vector sa = Vector::Zero(d);
  Vector sb = Vector::Zero(d);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (ys[i].size() != d) throw DimensionError("line fit: points differ in dimension");
    sa += (1.0 - times_[i]) * ys[i];
    sb += times_[i] * ys[i];
  }
  LineFit out;
  out.x0 = gram_pinv_(0, 0) * sa + gram_pinv_(0, 1) * sb;
  out.x1 = gram_pinv_(1, 0) * sa + gram_pinv_(1, 1) * sb;
  double total = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    total += ((1.0 - times_[i]) * out.x0 + times_[i] * out.x1 - ys[i]).squaredNorm();
  }
  out.cost = total / static_cast<double>(ys.size());
  return out;
}

LineFit LineFitter::fit(std::span<const Matrix* const> supports,
                        std::span<const std::size_t> idx) const {
  const std::size_t n = times_.size();
  const Eigen::Index d = supports.front()->cols();
  Vector sa = Vector::Zero(d);
  Vector sb = Vector::Zero(d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = supports[i]->row(static_cast<Eigen::Index>(idx[i])).transpose();
    sa += (1.0 - times_[i]) * y;
    sb += times_[i] * y;
  }
  LineFit out;
  out.x0 = gram_pinv_(0, 0) * sa + gram_pinv_(0, 1) * sb;
  out.x1 = gram_pinv_(1, 0) * sa + gram_pinv_(1, 1) * sb;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = supports[i]->row(static_cast<Eigen::Index>(idx[i])).transpose();
    total += ((1.0 - times_[i]) * out.x0 + times_[i] * out.x1 - y).squaredNorm();
  }
  out.cost = total / static_cast<double>(n);
  return out;
}

LineFit residual_cost(std::span<const double> ts, std::span<const Vector> ys) {
  if (ts.size() != ys.size() || ts.empty()) {
    throw DimensionError("residual_cost: need equally many (>= 1) timestamps and points");
  }
  return LineFitter(std::vector<double>(ts.begin(), ts.end())).fit(ys);
}

// ---------------------------------------------------------------------------
// Regression

RegressionResult solve_line_law(const std::vector<DiscreteMeasure>& measures,
                                std::span<const double> times, const SolverConfig& solver,
                                const std::vector<PairwiseConstraint>& pairwise) {
  if (measures.empty()) throw EmptyMeasureError("regression: no measures");
  if (measures.size() != times.size()) {
    throw DimensionError("regression: times and measures differ in count");
  }
  const Eigen::Index d = measures.front().dim();
  for (const auto& m : measures) {
    if (m.dim() != d) throw DimensionError("regression: measures differ in dimension");
  }

  MarginalSpec spec;
  for (const auto& m : measures) spec.axes.push_back({m.points(), m.weights()});
  spec.pairwise = pairwise;
  spec.validate();

  const LineFitter fitter(std::vector<double>(times.begin(), times.end()));
  std::vector<const Matrix*> supports;
  for (const auto& m : measures) supports.push_back(&m.points());
  const std::size_t cap = solver.kind == SolverKind::kExact ? solver.exact.size_cap
                                                            : solver.entropic.size_cap;
  const Tensor cost = evaluate_cost(
      spec.shape(),
      [&](std::span<const std::size_t> idx) { return fitter.fit(supports, idx).cost; }, cap);

  RegressionResult out{DiscreteEndpointLaw::dirac(Vector::Zero(d), Vector::Zero(d)), 0.0, {}, {}, {}};
  out.report.kind = solver.kind;
  if (solver.kind == SolverKind::kExact) {
    ExactResult r = solve_mm_exact(cost, spec, solver.exact);
    out.cost = r.value;
    out.plan = std::move(r.plan);
    out.report.iterations = r.iterations;
  } else {
    EntropicResult r = solve_mm_entropic(cost, spec, solver.entropic);
    out.cost = r.value;
    out.plan = std::move(r.plan);
    out.report.iterations = r.iterations;
    out.report.converged = r.converged;
    out.report.max_violation = r.max_violation;
  }

  const Tensor& plan = out.plan.tensor;
  double mass = 0.0;
  std::vector<std::size_t> idx(plan.rank());
  for (std::size_t flat = 0; flat < plan.size(); ++flat) {
    if (plan[flat] <= 0.0) continue;
    plan.unflatten(flat, idx);
    LineFit fit = fitter.fit(supports, idx);
    out.support.push_back({idx, plan[flat], std::move(fit.x0), std::move(fit.x1)});
    mass += plan[flat];
  }
  if (out.support.empty() || !(mass > 0.0)) throw NumericalError("regression: plan has no mass");

  const auto n = static_cast<Eigen::Index>(out.support.size());
  Matrix x0(n, d), x1(n, d);
  Vector w(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& s = out.support[static_cast<std::size_t>(k)];
    x0.row(k) = s.x0.transpose();
    x1.row(k) = s.x1.transpose();
    w[k] = s.weight / mass;
  }
  out.pi = DiscreteEndpointLaw(std::move(x0), std::move(x1), std::move(w));
  return out;
}

RegressionResult fit_regression(const TimedDataset& dataset, const SolverConfig& solver,
                                const std::vector<PairwiseConstraint>& pairwise) {
  if (dataset.distinct_times() < 2) {
    throw DegenerateTimestampsError("regression needs at least two distinct timestamps");
  }
  const auto times = dataset.times();
  return solve_line_law(dataset.measures(), times, solver, pairwise);
}

double regression_objective(const DiscreteEndpointLaw& pi, const TimedDataset& dataset) {
  if (pi.dim() != dataset.dim()) {
    throw DimensionError("regression_objective: endpoint law and data differ in dimension");
  }
  double total = 0.0;
  for (const auto& e : dataset.entries()) {
    total += w2_discrete(pushforward_line(pi, e.t), e.measure).cost;
  }
  return total / static_cast<double>(dataset.size());
}

// ---------------------------------------------------------------------------
// Displacement convexity

DiscreteEndpointLaw displacement_interpolate(const DiscreteEndpointLaw& a,
                                             const DiscreteEndpointLaw& b, double s) {
  if (!(s >= 0.0 && s <= 1.0)) throw RangeError("displacement_interpolate: s must lie in [0, 1]");
  if (a.dim() != b.dim()) throw DimensionError("displacement_interpolate: dimensions differ");
  if (s == 0.0) return a;
  if (s == 1.0) return b;
  const DiscreteMeasure ja = a.joint();
  const DiscreteMeasure jb = b.joint();
  const TransportResult ot = w2_discrete(ja, jb);
  const Matrix& plan = ot.plan.plan;

  std::vector<Eigen::Index> rows, cols;
  for (Eigen::Index i = 0; i < plan.rows(); ++i) {
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
      if (plan(i, j) > 0.0) {
        rows.push_back(i);
        cols.push_back(j);
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix pts(n, ja.dim());
  Vector w(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto i = rows[static_cast<std::size_t>(k)];
    const auto j = cols[static_cast<std::size_t>(k)];
    pts.row(k) = (1.0 - s) * ja.points().row(i) + s * jb.points().row(j);
    w[k] = plan(i, j);
  }
  w /= w.sum();
  return DiscreteEndpointLaw::from_joint(merge_atoms(pts, w));
}

ConvexityProbe nonconvexity_probe(const DiscreteEndpointLaw& a, const DiscreteEndpointLaw& b,
                                  const TimedDataset& dataset, std::size_t grid_size) {
  if (grid_size < 3) throw RangeError("nonconvexity_probe: grid needs at least 3 points");
  ConvexityProbe out;
  for (std::size_t k = 0; k < grid_size; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(grid_size - 1);
    out.values.emplace_back(s, regression_objective(displacement_interpolate(a, b, s), dataset));
  }
  for (std::size_t k = 1; k + 1 < grid_size; ++k) {
    const double mid = 0.5 * (out.values[k - 1].second + out.values[k + 1].second);
    if (out.values[k].second > mid + 1e-9) {
      out.is_convex = false;
      out.first_violation = k;
      break;
    }
  }
  return out;
}

NonconvexityFixture displacement_counterexample() {
  Matrix x0(2, 1), x1(2, 1);
  x0 << 0.0, 3.0;
  x1 << 1.0, 2.0;
  DiscreteEndpointLaw start(x0, x1, Vector::Constant(2, 0.5));
  x0 << 0.0, -3.0;
  x1 << 0.0, 2.0;
  DiscreteEndpointLaw end(x0, x1, Vector::Constant(2, 0.5));
  Matrix y(2, 1);
  y << 1.0, 2.0;
  TimedDataset data({TimedMeasure{1.0, DiscreteMeasure::uniform(y)}});
  return {std::move(start), std::move(end), std::move(data)};
}

// ---------------------------------------------------------------------------
// Path sampling and the absolute-continuity bound

std::vector<PathSample> sample_paths(const EndpointLaw& pi, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw RangeError("sample_paths: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<PathSample> out;
  out.reserve(n);

  if (const auto* law = std::get_if<DiscreteEndpointLaw>(&pi)) {
    std::vector<double> cdf(static_cast<std::size_t>(law->size()));
    double acc = 0.0;
    for (Eigen::Index k = 0; k < law->size(); ++k) {
      acc += law->weights()[k];
      cdf[static_cast<std::size_t>(k)] = acc;
    }
    std::uniform_real_distribution<double> unif(0.0, acc);
    for (std::size_t s = 0; s < n; ++s) {
      const double u = unif(rng);
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      const auto k = static_cast<Eigen::Index>(it - cdf.begin());
      out.push_back({law->x0().row(k).transpose(), law->x1().row(k).transpose(),
                     law->weights()[k]});
    }
    return out;
  }

  const auto& law = std::get<GaussianEndpointLaw>(pi);
  const Eigen::Index d = law.dim();
  const Eigen::Index n2 = 2 * d;
  const Eigen::SelfAdjointEigenSolver<Matrix> es(law.covariance());
  const Vector& ev = es.eigenvalues();
  const double cutoff = linalg::kPinvCutoff * std::max(ev.maxCoeff(), 0.0);
  Vector root(n2), inv(n2);
  double log_pdet = 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < n2; ++k) {
    if (ev[k] > cutoff && ev[k] > 0.0) {
      root[k] = std::sqrt(ev[k]);
      inv[k] = 1.0 / ev[k];
      log_pdet += std::log(ev[k]);
      ++rank;
    } else {
      root[k] = 0.0;
      inv[k] = 0.0;
    }
  }
  const Matrix& basis = es.eigenvectors();
  const double log_norm =
      -0.5 * (static_cast<double>(rank) * std::log(2.0 * std::numbers::pi) + log_pdet);

  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector z(n2);
  for (std::size_t s = 0; s < n; ++s) {
    for (Eigen::Index k = 0; k < n2; ++k) z[k] = gauss(rng);
    const Vector coords = root.cwiseProduct(z);  // in the eigenbasis
    const Vector x = law.mean() + basis * coords;
    const double maha = coords.cwiseProduct(coords).dot(inv);
    const double density = rank == 0 ? 1.0 : std::exp(log_norm - 0.5 * maha);
    out.push_back({x.head(d), x.tail(d), density});
  }
  return out;
}

double ac_bound_check(const EndpointLaw& pi, std::span<const double> grid) {
  if (grid.size() < 2) throw RangeError("ac_bound_check: grid needs at least 2 points");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!(grid[k] >= 0.0 && grid[k] <= 1.0)) throw RangeError("ac_bound_check: grid outside [0, 1]");
    if (k > 0 && grid[k] < grid[k - 1]) throw RangeError("ac_bound_check: grid is not sorted");
  }
  const double c = std::visit([](const auto& law) { return law.mean_squared_length(); }, pi);
  if (!(c > 0.0)) return 0.0;
  const double root_c = std::sqrt(c);

  std::vector<Marginal> marginals;
  marginals.reserve(grid.size());
  for (double t : grid) marginals.push_back(pushforward_line(pi, t));

  double worst = 0.0;
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double dt = grid[k] - grid[k - 1];
    if (dt <= 0.0) continue;
    const double dist = std::sqrt(w2(marginals[k - 1], marginals[k]));
    worst = std::max(worst, dist / (dt * root_c));
  }
  return worst;
}

}  // namespace wregress
