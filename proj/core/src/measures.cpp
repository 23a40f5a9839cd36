#include "wregress/measures.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "min_cost_flow.hpp"
#include "wregress/errors.hpp"

namespace wregress {

namespace {

void validate_weights(const Vector& weights, const char* what) {
  if (!weights.allFinite()) {
    throw InvalidMeasureError(std::string(what) + ": non-finite weight");
  }
  if ((weights.array() < 0.0).any()) {
    throw InvalidMeasureError(std::string(what) + ": negative weight");
  }
  const double total = weights.sum();
  if (std::abs(total - 1.0) > DiscreteMeasure::kMassTolerance) {
    throw InvalidMeasureError(std::string(what) + ": weights sum to " + std::to_string(total) +
                              ", expected 1");
  }
}

std::vector<Eigen::Index> nonzero_rows(const Vector& weights) {
  std::vector<Eigen::Index> keep;
  keep.reserve(static_cast<std::size_t>(weights.size()));
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) keep.push_back(i);
  }
  return keep;
}

Matrix select_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = m.row(rows[k]);
  return out;
}

Vector select(const Vector& v, const std::vector<Eigen::Index>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[rows[k]];
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// DiscreteMeasure

DiscreteMeasure::DiscreteMeasure(Matrix points, Vector weights) {
  if (points.rows() == 0 || weights.size() == 0) {
    throw EmptyMeasureError("discrete measure has no atoms");
  }
  if (points.cols() < 1) throw DimensionError("discrete measure: dimension must be >= 1");
  if (points.rows() != weights.size()) {
    throw InvalidMeasureError("discrete measure: " + std::to_string(points.rows()) +
                              " points but " + std::to_string(weights.size()) + " weights");
  }
  if (!points.allFinite()) throw InvalidMeasureError("discrete measure: non-finite point");
  validate_weights(weights, "discrete measure");

  const auto keep = nonzero_rows(weights);
  if (keep.size() == static_cast<std::size_t>(weights.size())) {
    points_ = std::move(points);
    weights_ = std::move(weights);
  } else {
    points_ = select_rows(points, keep);
    weights_ = select(weights, keep);
  }
}

DiscreteMeasure DiscreteMeasure::dirac(const Vector& x) {
  return DiscreteMeasure(x.transpose(), Vector::Ones(1));
}

DiscreteMeasure DiscreteMeasure::uniform(Matrix points) {
  const Eigen::Index n = points.rows();
  if (n == 0) throw EmptyMeasureError("discrete measure has no atoms");
  return DiscreteMeasure(std::move(points), Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

Vector DiscreteMeasure::mean() const { return points_.transpose() * weights_; }

// ---------------------------------------------------------------------------
// GaussianMeasure

GaussianMeasure::GaussianMeasure(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  if (mean_.size() < 1) throw DimensionError("gaussian measure: dimension must be >= 1");
  if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size()) {
    throw DimensionError("gaussian measure: covariance shape does not match mean");
  }
  if (!mean_.allFinite()) throw InvalidMeasureError("gaussian measure: non-finite mean");
  linalg::require_psd(covariance_, "gaussian measure covariance");
}

// ---------------------------------------------------------------------------
// Endpoint laws

DiscreteEndpointLaw::DiscreteEndpointLaw(Matrix x0, Matrix x1, Vector weights) {
  if (x0.rows() == 0 || weights.size() == 0) throw EmptyMeasureError("endpoint law has no atoms");
  if (x0.rows() != x1.rows() || x0.cols() != x1.cols()) {
    throw DimensionError("endpoint law: x0 and x1 shapes differ");
  }
  if (x0.cols() < 1) throw DimensionError("endpoint law: dimension must be >= 1");
  if (x0.rows() != weights.size()) {
    throw InvalidMeasureError("endpoint law: atom count and weight count differ");
  }
  if (!x0.allFinite() || !x1.allFinite()) throw InvalidMeasureError("endpoint law: non-finite atom");
  validate_weights(weights, "endpoint law");

  const auto keep = nonzero_rows(weights);
  if (keep.size() == static_cast<std::size_t>(weights.size())) {
    x0_ = std::move(x0);
    x1_ = std::move(x1);
    weights_ = std::move(weights);
  } else {
    x0_ = select_rows(x0, keep);
    x1_ = select_rows(x1, keep);
    weights_ = select(weights, keep);
  }
}

DiscreteEndpointLaw DiscreteEndpointLaw::dirac(const Vector& x0, const Vector& x1) {
  if (x0.size() != x1.size()) throw DimensionError("endpoint law: x0 and x1 dimensions differ");
  return DiscreteEndpointLaw(x0.transpose(), x1.transpose(), Vector::Ones(1));
}

DiscreteEndpointLaw DiscreteEndpointLaw::from_joint(const DiscreteMeasure& joint) {
  if (joint.dim() % 2 != 0) throw DimensionError("endpoint law: joint dimension must be even");
  const Eigen::Index d = joint.dim() / 2;
  return DiscreteEndpointLaw(joint.points().leftCols(d), joint.points().rightCols(d),
                             joint.weights());
}

DiscreteMeasure DiscreteEndpointLaw::joint() const {
  Matrix pts(size(), 2 * dim());
  pts << x0_, x1_;
  return DiscreteMeasure(std::move(pts), weights_);
}

double DiscreteEndpointLaw::mean_squared_length() const {
  return (x1_ - x0_).rowwise().squaredNorm().dot(weights_);
}

GaussianEndpointLaw::GaussianEndpointLaw(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  if (mean_.size() < 2 || mean_.size() % 2 != 0) {
    throw DimensionError("gaussian endpoint law: mean must have even dimension 2d >= 2");
  }
  if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size()) {
    throw DimensionError("gaussian endpoint law: covariance shape does not match mean");
  }
  if (!mean_.allFinite()) throw InvalidMeasureError("gaussian endpoint law: non-finite mean");
  linalg::require_psd(covariance_, "gaussian endpoint law covariance");
}

double GaussianEndpointLaw::mean_squared_length() const {
  const Eigen::Index d = dim();
  const Vector dm = mean_.tail(d) - mean_.head(d);
  const Matrix& c = covariance_;
  // Var(x1 - x0) = C11 + C00 - C01 - C10
  const double tr = c.topLeftCorner(d, d).trace() + c.bottomRightCorner(d, d).trace() -
                    c.topRightCorner(d, d).trace() - c.bottomLeftCorner(d, d).trace();
  return dm.squaredNorm() + tr;
}

Eigen::Index dim(const EndpointLaw& pi) {
  return std::visit([](const auto& law) { return law.dim(); }, pi);
}

// ---------------------------------------------------------------------------
// Transport

TransportResult w2_discrete(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("w2_discrete: dimensions " + std::to_string(a.dim()) + " and " +
                         std::to_string(b.dim()) + " differ");
  }
  Matrix cost(a.size(), b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      cost(i, j) = (a.points().row(i) - b.points().row(j)).squaredNorm();
    }
  }
  TransportResult out;
  out.plan.plan = detail::solve_transportation(a.weights(), b.weights(), cost);
  out.plan.source_points = a.points();
  out.plan.target_points = b.points();
  out.cost = std::max(0.0, out.plan.plan.cwiseProduct(cost).sum());
  return out;
}

Matrix gaussian_cross_term(const Matrix& sigma0, const Matrix& sigma1) {
  linalg::require_psd(sigma0, "gaussian_cross_term: sigma0");
  linalg::require_psd(sigma1, "gaussian_cross_term: sigma1");
  if (sigma0.rows() != sigma1.rows()) throw DimensionError("gaussian_cross_term: dimensions differ");
  const Matrix root0 = linalg::psd_sqrt(sigma0);
  const Matrix inner = linalg::psd_sqrt(root0 * sigma1 * root0);
  return root0 * inner * linalg::psd_pinv_sqrt(sigma0);
}

double w2_gaussian(const GaussianMeasure& a, const GaussianMeasure& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("w2_gaussian: dimensions " + std::to_string(a.dim()) + " and " +
                         std::to_string(b.dim()) + " differ");
  }
  const Matrix& s0 = a.covariance();
  const Matrix& s1 = b.covariance();
  // tr S equals the trace of the inner root even when s0 is singular, and the
  // inner root is the better conditioned of the two.
  const Matrix root0 = linalg::psd_sqrt(s0);
  const Matrix inner = root0 * s1 * root0;
  const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (inner + inner.transpose()),
                                                 Eigen::EigenvaluesOnly);
  const double tr_cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value =
      (a.mean() - b.mean()).squaredNorm() + s0.trace() + s1.trace() - 2.0 * tr_cross;
  return std::max(0.0, value);
}

double w2(const Marginal& a, const Marginal& b) {
  if (a.index() != b.index()) throw DimensionError("w2: marginals are of different kinds");
  if (const auto* da = std::get_if<DiscreteMeasure>(&a)) {
    return w2_discrete(*da, std::get<DiscreteMeasure>(b)).cost;
  }
  return w2_gaussian(std::get<GaussianMeasure>(a), std::get<GaussianMeasure>(b));
}

GaussianMeasure gaussian_geodesic(const GaussianMeasure& a, const GaussianMeasure& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw RangeError("gaussian_geodesic: t must lie in [0, 1]");
  if (a.dim() != b.dim()) throw DimensionError("gaussian_geodesic: dimensions differ");
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  const Matrix s = gaussian_cross_term(a.covariance(), b.covariance());
  const double u = 1.0 - t;
  Matrix cov = u * u * a.covariance() + t * t * b.covariance() + t * u * (s + s.transpose());
  cov = 0.5 * (cov + cov.transpose());
  return GaussianMeasure(u * a.mean() + t * b.mean(), std::move(cov));
}

// ---------------------------------------------------------------------------
// Line pushforwards

DiscreteMeasure merge_atoms(const Matrix& points, const Vector& weights, double tol) {
  std::vector<Eigen::Index> rep;
  std::vector<double> mass;
  const double tol2 = tol * tol;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if (weights[i] <= 0.0) continue;
    bool merged = false;
    for (std::size_t k = 0; k < rep.size(); ++k) {
      if ((points.row(i) - points.row(rep[k])).squaredNorm() <= tol2) {
        mass[k] += weights[i];
        merged = true;
        break;
      }
    }
    if (!merged) {
      rep.push_back(i);
      mass.push_back(weights[i]);
    }
  }
  Matrix pts(static_cast<Eigen::Index>(rep.size()), points.cols());
  Vector w(static_cast<Eigen::Index>(rep.size()));
  for (std::size_t k = 0; k < rep.size(); ++k) {
    pts.row(static_cast<Eigen::Index>(k)) = points.row(rep[k]);
    w[static_cast<Eigen::Index>(k)] = mass[k];
  }
  return DiscreteMeasure(std::move(pts), std::move(w));
}

DiscreteMeasure pushforward_line(const DiscreteEndpointLaw& pi, double t) {
  if (t == 0.0) return merge_atoms(pi.x0(), pi.weights());
  if (t == 1.0) return merge_atoms(pi.x1(), pi.weights());
  const Matrix pts = (1.0 - t) * pi.x0() + t * pi.x1();
  return merge_atoms(pts, pi.weights());
}

GaussianMeasure pushforward_line(const GaussianEndpointLaw& pi, double t) {
  const Eigen::Index d = pi.dim();
  Matrix lift(d, 2 * d);
  lift << (1.0 - t) * Matrix::Identity(d, d), t * Matrix::Identity(d, d);
  Matrix cov = lift * pi.covariance() * lift.transpose();
  cov = 0.5 * (cov + cov.transpose());
  return GaussianMeasure(lift * pi.mean(), std::move(cov));
}

Marginal pushforward_line(const EndpointLaw& pi, double t) {
  return std::visit([t](const auto& law) -> Marginal { return pushforward_line(law, t); }, pi);
}

}  // namespace wregress
