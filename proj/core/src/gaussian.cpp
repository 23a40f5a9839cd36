#include "wregress/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "wregress/errors.hpp"
#include "wregress/regression.hpp"

namespace wregress {

// ---------------------------------------------------------------------------
// Dataset

GaussianDataset::GaussianDataset(std::vector<GaussianTimedMeasure> entries)
    : entries_(std::move(entries)) {
  if (entries_.empty()) throw EmptyMeasureError("gaussian dataset has no entries");
  const Eigen::Index d = entries_.front().measure.dim();
  for (const auto& e : entries_) {
    if (e.measure.dim() != d) throw DimensionError("gaussian dataset: measures differ in dimension");
    if (!std::isfinite(e.t)) throw RangeError("gaussian dataset: non-finite timestamp");
  }
}

std::vector<double> GaussianDataset::times() const {
  std::vector<double> out;
  for (const auto& e : entries_) out.push_back(e.t);
  return out;
}

std::size_t GaussianDataset::distinct_times() const {
  std::set<double> s;
  for (const auto& e : entries_) s.insert(e.t);
  return s.size();
}

MeanLine fit_means(const GaussianDataset& dataset) {
  if (dataset.distinct_times() < 2) {
    throw DegenerateTimestampsError("mean regression needs at least two distinct timestamps");
  }
  std::vector<Vector> means;
  for (const auto& e : dataset.entries()) means.push_back(e.measure.mean());
  const LineFit fit = LineFitter(dataset.times()).fit(means);
  return {fit.x0, fit.x1};
}

// ---------------------------------------------------------------------------
// Joint covariance

JointCovariance::JointCovariance(Matrix matrix, Eigen::Index d) : matrix_(std::move(matrix)), d_(d) {
  if (d_ < 1 || matrix_.rows() != matrix_.cols() || matrix_.rows() % d_ != 0 ||
      matrix_.rows() / d_ < 2) {
    throw DimensionError("joint covariance: shape is not (N + 2) d square");
  }
}

Matrix JointCovariance::block(std::size_t row_slot, std::size_t col_slot) const {
  const Eigen::Index slots = matrix_.rows() / d_;
  if (static_cast<Eigen::Index>(row_slot) >= slots || static_cast<Eigen::Index>(col_slot) >= slots) {
    throw RangeError("joint covariance: block index out of range");
  }
  return matrix_.block(static_cast<Eigen::Index>(row_slot) * d_,
                       static_cast<Eigen::Index>(col_slot) * d_, d_, d_);
}

// ---------------------------------------------------------------------------
// SDP assembly

SdpProblem build_sdp(const GaussianDataset& dataset) {
  SdpProblem p;
  p.d = dataset.dim();
  p.n = dataset.size();
  p.times = dataset.times();
  const double n = static_cast<double>(p.n);

  double tbar = 0.0, t2bar = 0.0;
  for (double t : p.times) {
    tbar += t;
    t2bar += t * t;
  }
  tbar /= n;
  t2bar /= n;

  p.coef_cx0 = 1.0 - 2.0 * tbar + t2bar;
  p.coef_cx0_as_printed = 1.0 - 2.0 * tbar + tbar * tbar;
  p.coef_cx1 = t2bar;
  p.coef_sx0x1 = 2.0 * (tbar - t2bar);

  const Eigen::Index d = p.d;
  const Eigen::Index k = static_cast<Eigen::Index>(p.n + 2) * d;
  const Matrix eye = Matrix::Identity(d, d);
  p.weights = Matrix::Zero(k, k);
  p.weights.block(0, 0, d, d) = p.coef_cx0 * eye;
  p.weights.block(d, d, d, d) = p.coef_cx1 * eye;
  p.weights.block(0, d, d, d) = 0.5 * p.coef_sx0x1 * eye;
  p.weights.block(d, 0, d, d) = 0.5 * p.coef_sx0x1 * eye;

  for (std::size_t i = 0; i < p.n; ++i) {
    const double t = p.times[i];
    const double c0 = -2.0 / n * (1.0 - t);
    const double c1 = -2.0 / n * t;
    p.coef_sx0y.push_back(c0);
    p.coef_sx1y.push_back(c1);
    const Eigen::Index off = static_cast<Eigen::Index>(2 + i) * d;
    p.weights.block(0, off, d, d) = 0.5 * c0 * eye;
    p.weights.block(off, 0, d, d) = 0.5 * c0 * eye;
    p.weights.block(d, off, d, d) = 0.5 * c1 * eye;
    p.weights.block(off, d, d, d) = 0.5 * c1 * eye;

    const Matrix& c = dataset.entries()[i].measure.covariance();
    p.data_covariances.push_back(c);
    p.constant += c.trace() / n;
  }
  return p;
}

Matrix SdpProblem::initial_point() const {
  const Eigen::Index k = static_cast<Eigen::Index>(n + 2) * d;
  Matrix c = Matrix::Zero(k, k);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(2 + i) * d;
    c.block(off, off, d, d) = data_covariances[i];
  }
  return c;
}

// ---------------------------------------------------------------------------
// Curve

GaussianEndpointLaw GaussianCurve::endpoint_law() const {
  const Eigen::Index d = m0.size();
  Vector mean(2 * d);
  mean << m0, m1;
  Matrix cov(2 * d, 2 * d);
  cov << c_x0, s_x0x1, s_x0x1.transpose(), c_x1;
  return GaussianEndpointLaw(std::move(mean), linalg::project_psd(cov));
}

GaussianMeasure gaussian_curve(const GaussianCurve& curve, double t) {
  const double u = 1.0 - t;
  const Matrix cov = u * u * curve.c_x0 + t * t * curve.c_x1 +
                     t * u * (curve.s_x0x1 + curve.s_x0x1.transpose());
  return GaussianMeasure(u * curve.m0 + t * curve.m1, linalg::project_psd(cov));
}

double sdp_regression_cost(const SdpProblem& problem, const GaussianCurve& curve) {
  double total = 0.0;
  const Vector zero = Vector::Zero(problem.d);
  for (std::size_t i = 0; i < problem.n; ++i) {
    GaussianMeasure g = gaussian_curve(curve, problem.times[i]);
    total += w2_gaussian(GaussianMeasure(zero, g.covariance()),
                         GaussianMeasure(zero, problem.data_covariances[i]));
  }
  return total / static_cast<double>(problem.n);
}

// ---------------------------------------------------------------------------
// Solver

namespace {

class FeasibleSetProjector {
 public:
  FeasibleSetProjector(const SdpProblem& problem, const SdpOptions& opts)
      : problem_(problem), opts_(opts) {
    for (const auto& c : problem.data_covariances) scale_ = std::max(scale_, c.cwiseAbs().maxCoeff());
  }

  // Euclidean projection onto PSD ∩ {C_yi fixed}. Tries the dual first
  // (quasi-Newton on the multipliers of the fixed blocks; fast when the data
  // covariances are nonsingular) and falls back to Dykstra's alternating
  // projections. `converged` is false when neither met the tolerance.
  Matrix project(const Matrix& z, bool& converged) const {
    Matrix x = project_dual(z, converged);
    if (converged) return x;
    return project_dykstra(z, converged);
  }

 private:
  Eigen::Index offset(std::size_t i) const { return static_cast<Eigen::Index>(2 + i) * problem_.d; }

  double tolerance(const Matrix& z) const {
    return opts_.projection_tolerance * (1.0 + std::max(scale_, z.cwiseAbs().maxCoeff()));
  }

  void overwrite_data_blocks(Matrix& c) const {
    const Eigen::Index d = problem_.d;
    for (std::size_t i = 0; i < problem_.n; ++i) c.block(offset(i), offset(i), d, d) = problem_.data_covariances[i];
  }

  // min_L  f(L) = 0.5 ||P(Z + L)||^2 - <L, C>  over multipliers L living on
  // the data blocks; grad = P(Z + L)_ii - C_i, and P(Z + L*) is the projection.
  Matrix project_dual(const Matrix& z, bool& converged) const {
    const Eigen::Index d = problem_.d;
    const Eigen::Index block = d * d;
    const Eigen::Index m = static_cast<Eigen::Index>(problem_.n) * block;
    const double tol = tolerance(z);
    converged = false;

    Matrix x;
    auto evaluate = [&](const Vector& lam, Vector& grad) {
      Matrix shifted = z;
      double linear = 0.0;
      for (std::size_t i = 0; i < problem_.n; ++i) {
        const auto l = lam.segment(static_cast<Eigen::Index>(i) * block, block).reshaped(d, d);
        shifted.block(offset(i), offset(i), d, d) += l;
        linear += (l.array() * problem_.data_covariances[i].array()).sum();
      }
      x = linalg::project_psd(shifted);
      ++eigen_solves_;
      grad.resize(m);
      for (std::size_t i = 0; i < problem_.n; ++i) {
        grad.segment(static_cast<Eigen::Index>(i) * block, block) =
            (x.block(offset(i), offset(i), d, d) - problem_.data_covariances[i]).reshaped();
      }
      return 0.5 * x.squaredNorm() - linear;
    };

    // Start from the multipliers that make the data blocks exact before the
    // cone projection.
    Vector lam(m);
    for (std::size_t i = 0; i < problem_.n; ++i) {
      lam.segment(static_cast<Eigen::Index>(i) * block, block) =
          (problem_.data_covariances[i] - z.block(offset(i), offset(i), d, d)).reshaped();
    }
    Vector grad;
    double f = evaluate(lam, grad);
    if (warm_.size() == m) {
      // Successive projections in the outer loop tend to share multipliers.
      Vector warm_grad;
      const double warm_f = evaluate(warm_, warm_grad);
      if (warm_f < f) {
        lam = warm_;
        grad = std::move(warm_grad);
        f = warm_f;
      }
    }

    constexpr std::size_t kMemory = 8;
    std::vector<Vector> ss, ys;
    std::vector<double> rhos;
    for (std::size_t it = 0; it < opts_.projection_max_iterations; ++it) {
      if (grad.cwiseAbs().maxCoeff() < tol) {
        converged = true;
        break;
      }
      // two-loop recursion
      Vector q = grad;
      std::vector<double> alpha(ss.size());
      for (std::size_t k = ss.size(); k-- > 0;) {
        alpha[k] = rhos[k] * ss[k].dot(q);
        q -= alpha[k] * ys[k];
      }
      if (!ss.empty()) q *= ss.back().dot(ys.back()) / ys.back().squaredNorm();
      for (std::size_t k = 0; k < ss.size(); ++k) {
        const double beta = rhos[k] * ys[k].dot(q);
        q += (alpha[k] - beta) * ss[k];
      }
      Vector dir = -q;
      double slope = grad.dot(dir);
      if (!(slope < 0.0)) {
        dir = -grad;
        slope = -grad.squaredNorm();
        ss.clear();
        ys.clear();
        rhos.clear();
      }

      double step = 1.0;
      Vector next_grad;
      Vector next = lam + dir;
      double next_f = evaluate(next, next_grad);
      // f is only known to a few ulps; near the optimum the Armijo decrease
      // drops below that and must not block progress on the gradient.
      const double noise = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
      while (next_f > f + 1e-4 * step * slope + noise && step > 1e-12) {
        step *= 0.5;
        next = lam + step * dir;
        next_f = evaluate(next, next_grad);
      }
      if (next_f > f + 1e-4 * step * slope + noise) break;

      Vector s = next - lam;
      Vector y = next_grad - grad;
      const double sy = s.dot(y);
      if (sy > 1e-16 * s.norm() * y.norm()) {
        if (ss.size() == kMemory) {
          ss.erase(ss.begin());
          ys.erase(ys.begin());
          rhos.erase(rhos.begin());
        }
        ss.push_back(std::move(s));
        ys.push_back(std::move(y));
        rhos.push_back(1.0 / sy);
      }
      lam = std::move(next);
      grad = std::move(next_grad);
      f = next_f;
    }
    if (!converged) {
      // the loop may exit right after an accepted step that met the tolerance
      converged = grad.cwiseAbs().maxCoeff() < tol;
    }
    // `x` belongs to the last evaluation, which may be a rejected trial point.
    evaluate(lam, grad);
    if (converged) warm_ = lam;
    return 0.5 * (x + x.transpose());
  }

  Matrix project_dykstra(const Matrix& z, bool& converged) const {
    const double tol = tolerance(z);
    converged = false;
    Matrix x = z;
    overwrite_data_blocks(x);
    Matrix p = Matrix::Zero(z.rows(), z.cols());
    Matrix q = Matrix::Zero(z.rows(), z.cols());
    for (std::size_t it = 0; it < opts_.projection_max_iterations; ++it) {
      const Matrix y = linalg::project_psd(x + p);
      ++eigen_solves_;
      p = x + p - y;
      Matrix next = y + q;
      overwrite_data_blocks(next);
      q = y + q - next;
      const double gap = (y - next).cwiseAbs().maxCoeff();
      const double move = (next - x).cwiseAbs().maxCoeff();
      x = std::move(next);
      if (gap < tol && move < tol) {
        converged = true;
        break;
      }
    }
    return 0.5 * (x + x.transpose());
  }

  const SdpProblem& problem_;
  const SdpOptions& opts_;
  double scale_ = 0.0;
  mutable Vector warm_;

 public:
  mutable std::size_t eigen_solves_ = 0;
};

// For a fixed endpoint covariance Sigma the best cross blocks couple each
// y_i optimally with x_{t_i}, so the SDP value is min over Sigma of
// g(Sigma) = (1/N) sum_i W2^2(L_i Sigma L_i', C_i) - constant, with
// L_i = [(1 - t_i) I, t_i I]. g is convex and cheap (2d x 2d); its minimizer
// seeds the projected gradient on the full joint covariance.
Matrix transport_map(const Matrix& a, const Matrix& b) {
  const Matrix ra = linalg::psd_sqrt(a);
  const Matrix ia = linalg::psd_pinv_sqrt(a);
  return ia * linalg::psd_sqrt(ra * b * ra) * ia;
}

Matrix line_map(double t, Eigen::Index d) {
  Matrix l(d, 2 * d);
  l << (1.0 - t) * Matrix::Identity(d, d), t * Matrix::Identity(d, d);
  return l;
}

double reduced_cost(const SdpProblem& problem, const Matrix& sigma, Matrix* grad) {
  const Eigen::Index d = problem.d;
  const double n = static_cast<double>(problem.n);
  const Vector zero = Vector::Zero(d);
  double total = 0.0;
  if (grad) grad->setZero(2 * d, 2 * d);
  for (std::size_t i = 0; i < problem.n; ++i) {
    const Matrix l = line_map(problem.times[i], d);
    const Matrix a = l * sigma * l.transpose();
    const Matrix& c = problem.data_covariances[i];
    total += w2_gaussian(GaussianMeasure(zero, linalg::project_psd(a)), GaussianMeasure(zero, c));
    if (grad) *grad += l.transpose() * (Matrix::Identity(d, d) - transport_map(a, c)) * l / n;
  }
  if (grad) *grad = 0.5 * (*grad + grad->transpose());
  return total / n;
}

Matrix reduced_endpoint_covariance(const SdpProblem& problem) {
  const Eigen::Index d = problem.d;
  Matrix mean_cov = Matrix::Zero(d, d);
  for (const auto& c : problem.data_covariances) mean_cov += c / static_cast<double>(problem.n);
  Matrix sigma = Matrix::Zero(2 * d, 2 * d);
  sigma.topLeftCorner(d, d) = mean_cov;
  sigma.bottomRightCorner(d, d) = mean_cov;

  Matrix grad;
  double value = reduced_cost(problem, sigma, &grad);
  double alpha = 1.0;
  for (int it = 0; it < 5000 && alpha > 1e-14; ++it) {
    const Matrix next = linalg::project_psd(sigma - alpha * grad);
    const Matrix step = next - sigma;
    const double next_value = reduced_cost(problem, next, nullptr);
    const double bound = value + (grad.cwiseProduct(step)).sum() + step.squaredNorm() / (2.0 * alpha);
    if (next_value > bound + 1e-15 * (1.0 + std::abs(value))) {
      alpha *= 0.5;
      continue;
    }
    const double gain = value - next_value;
    sigma = next;
    value = reduced_cost(problem, sigma, &grad);
    if (step.cwiseAbs().maxCoeff() < 1e-13 * (1.0 + sigma.cwiseAbs().maxCoeff()) || gain < 1e-16) break;
    alpha = std::min(2.0 * alpha, 1e6);
  }
  return sigma;
}

// Joint covariance of (x0, x1, T_1 x_{t_1}, ..., T_N x_{t_N}) with the data
// blocks set to C_i (they already agree whenever L_i Sigma L_i' is nonsingular).
Matrix joint_from_endpoints(const SdpProblem& problem, const Matrix& sigma) {
  const Eigen::Index d = problem.d;
  const Eigen::Index k = static_cast<Eigen::Index>(problem.n + 2) * d;
  Matrix lift(k, 2 * d);  // rows: x0, x1, y_1, ..., y_N as linear maps of (x0, x1)
  lift.topRows(2 * d).setIdentity();
  for (std::size_t i = 0; i < problem.n; ++i) {
    const Matrix l = line_map(problem.times[i], d);
    lift.middleRows(static_cast<Eigen::Index>(2 + i) * d, d) =
        transport_map(l * sigma * l.transpose(), problem.data_covariances[i]) * l;
  }
  Matrix joint = lift * sigma * lift.transpose();
  for (std::size_t i = 0; i < problem.n; ++i) {
    const Eigen::Index off = static_cast<Eigen::Index>(2 + i) * d;
    joint.block(off, off, d, d) = problem.data_covariances[i];
  }
  return 0.5 * (joint + joint.transpose());
}

GaussianCurve curve_from(const JointCovariance& c, Eigen::Index d) {
  return GaussianCurve{Vector::Zero(d), Vector::Zero(d), c.c_x0(), c.c_x1(), c.s_x0x1()};
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& opts) {
  if (!(opts.step_size > 0.0)) throw StepSizeError("solve_sdp: step size must be positive");
  const FeasibleSetProjector projector(problem, opts);

  Matrix current = problem.initial_point();
  if (opts.warm_start) {
    bool projected = false;
    Matrix seeded = projector.project(joint_from_endpoints(problem, reduced_endpoint_covariance(problem)), projected);
    if (projected && problem.objective(seeded) < problem.objective(current)) current = std::move(seeded);
  }
  double value = problem.objective(current);
  double step = opts.step_size;

  // The surrogate is an expected squared residual minus `constant`, so it
  // can never drop below -constant; anything further means divergence.
  const double floor = -problem.constant - 1e-6 * (1.0 + problem.constant);

  SdpSolution out{JointCovariance(current, problem.d)};
  std::size_t it = 0;
  for (; it < opts.max_iterations; ++it) {
    bool projected = false;
    Matrix candidate = projector.project(current - step * problem.weights, projected);
    const double next = problem.objective(candidate);
    if (!std::isfinite(next) || next < floor) {
      throw StepSizeError("solve_sdp: projected gradient diverged");
    }
    // Long steps land far from the feasible set, where the alternating
    // projections may not settle; treat that like an increase.
    if (!projected || next > value + 1e-9 * (1.0 + std::abs(value))) {
      step *= 0.5;
      // No step of any length improves: stationary up to projection accuracy.
      if (step < 1e-14) {
        out.converged = true;
        ++it;
        break;
      }
      continue;
    }
    const double improvement = value - next;
    current = std::move(candidate);
    value = next;
    if (improvement < opts.tolerance) {
      out.converged = true;
      ++it;
      break;
    }
    // The objective is linear, so a longer projected step never does worse
    // in exact arithmetic; grow until the projection accuracy pushes back.
    step = std::min(2.0 * step, opts.max_step_size);
  }

  // data blocks are a hard constraint: pin them exactly; the PSD side is
  // only accurate to the projection tolerance anyway
  const Eigen::Index d = problem.d;
  for (std::size_t i = 0; i < problem.n; ++i) {
    const Eigen::Index o = static_cast<Eigen::Index>(2 + i) * d;
    current.block(o, o, d, d) = problem.data_covariances[i];
  }
  current = 0.5 * (current + current.transpose()).eval();
  value = problem.objective(current);
  out.covariance = JointCovariance(current, problem.d);
  out.objective = value;
  out.iterations = it;
  out.final_step_size = step;
  out.eigen_solves = projector.eigen_solves_;
  out.min_eigenvalue = linalg::min_eigenvalue(current);
  out.f_value = sdp_regression_cost(problem, curve_from(out.covariance, problem.d));
  return out;
}

// ---------------------------------------------------------------------------
// Geodesic baseline

GeodesicFit fit_geodesic_1d(const GaussianDataset& dataset) {
  if (dataset.dim() != 1) throw DimensionError("fit_geodesic_1d: data must be one-dimensional");
  if (dataset.distinct_times() < 2) {
    throw DegenerateTimestampsError("geodesic regression needs at least two distinct timestamps");
  }
  const auto times = dataset.times();
  std::vector<double> sd;
  for (const auto& e : dataset.entries()) sd.push_back(std::sqrt(std::max(0.0, e.measure.covariance()(0, 0))));
  const double n = static_cast<double>(times.size());
  const double lo = std::min(0.0, *std::min_element(times.begin(), times.end()));
  const double hi = std::max(1.0, *std::max_element(times.begin(), times.end()));

  auto cost_of = [&](double a, double b) {  // sigma(t) = a + b t
    double s = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double r = a + b * times[i] - sd[i];
      s += r * r;
    }
    return s / n;
  };
  auto feasible = [&](double a, double b) {
    const double tol = 1e-12 * (1.0 + std::abs(a) + std::abs(b));
    return a + b * lo >= -tol && a + b * hi >= -tol;
  };

  struct Candidate {
    double a, b;
  };
  std::vector<Candidate> candidates;
  {
    std::vector<Vector> ys;
    for (double s : sd) ys.push_back(Vector::Constant(1, s));
    const LineFit fit = LineFitter(times).fit(ys);
    const double s0 = fit.x0[0], s1 = fit.x1[0];
    candidates.push_back({s0, s1 - s0});
  }
  // Lines vanishing at one end of the interval: sigma(t) = b (t - anchor).
  for (double anchor : {lo, hi}) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      const double u = times[i] - anchor;
      num += u * sd[i];
      den += u * u;
    }
    const double b = den > 0.0 ? num / den : 0.0;
    candidates.push_back({-b * anchor, b});
  }
  candidates.push_back({0.0, 0.0});

  GeodesicFit best{0.0, 0.0, std::numeric_limits<double>::infinity()};
  for (const auto& c : candidates) {
    if (!feasible(c.a, c.b)) continue;
    const double cost = cost_of(c.a, c.b);
    if (cost < best.cost) best = {std::max(0.0, c.a), std::max(0.0, c.a + c.b), cost};
  }
  return best;
}

// ---------------------------------------------------------------------------

GaussianRegressionResult fit_gaussian_regression(const GaussianDataset& dataset,
                                                 const SdpOptions& opts) {
  GaussianRegressionResult out{fit_means(dataset), build_sdp(dataset), {JointCovariance(Matrix::Zero(2, 2), 1)}, {}, 0.0};
  out.sdp = solve_sdp(out.problem, opts);
  out.curve = GaussianCurve{out.means.m0, out.means.m1, out.sdp.covariance.c_x0(),
                            out.sdp.covariance.c_x1(), out.sdp.covariance.s_x0x1()};
  double total = 0.0;
  for (const auto& e : dataset.entries()) total += w2_gaussian(gaussian_curve(out.curve, e.t), e.measure);
  out.total_cost = total / static_cast<double>(dataset.size());
  return out;
}

}  // namespace wregress
