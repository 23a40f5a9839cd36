#pragma once

#include <variant>

#include "wregress/linalg.hpp"

namespace wregress {

/// Weighted finite point set in R^d. Rows of `points` are atoms.
/// Zero-weight atoms are dropped on construction.
class DiscreteMeasure {
 public:
  inline static constexpr double kMassTolerance = 1e-12;

  DiscreteMeasure(Matrix points, Vector weights);

  static DiscreteMeasure dirac(const Vector& x);
  static DiscreteMeasure uniform(Matrix points);

  const Matrix& points() const { return points_; }
  const Vector& weights() const { return weights_; }
  Vector point(Eigen::Index i) const { return points_.row(i).transpose(); }
  double weight(Eigen::Index i) const { return weights_[i]; }

  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }

  Vector mean() const;

 private:
  Matrix points_;
  Vector weights_;
};

class GaussianMeasure {
 public:
  GaussianMeasure(Vector mean, Matrix covariance);

  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  Eigen::Index dim() const { return mean_.size(); }

 private:
  Vector mean_;
  Matrix covariance_;
};

/// Transport plan between two discrete measures. plan(i, j) is the mass sent
/// from source atom i to target atom j.
struct Coupling {
  Matrix plan;
  Matrix source_points;
  Matrix target_points;
};

/// Discrete law on endpoint pairs (x0, x1): a random line segment
/// t -> (1 - t) x0 + t x1.
class DiscreteEndpointLaw {
 public:
  DiscreteEndpointLaw(Matrix x0, Matrix x1, Vector weights);

  static DiscreteEndpointLaw dirac(const Vector& x0, const Vector& x1);
  /// Splits a measure on R^{2d} into its (x0, x1) halves.
  static DiscreteEndpointLaw from_joint(const DiscreteMeasure& joint);

  const Matrix& x0() const { return x0_; }
  const Matrix& x1() const { return x1_; }
  const Vector& weights() const { return weights_; }
  Eigen::Index size() const { return x0_.rows(); }
  Eigen::Index dim() const { return x0_.cols(); }

  /// The same law viewed as a measure on R^{2d}.
  DiscreteMeasure joint() const;
  /// E ||x1 - x0||^2
  double mean_squared_length() const;

 private:
  Matrix x0_;
  Matrix x1_;
  Vector weights_;
};

/// Gaussian law on R^{2d}; mean = [m_x0; m_x1], covariance in the same block order.
class GaussianEndpointLaw {
 public:
  GaussianEndpointLaw(Vector mean, Matrix covariance);

  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  Eigen::Index dim() const { return mean_.size() / 2; }

  double mean_squared_length() const;

 private:
  Vector mean_;
  Matrix covariance_;
};

using EndpointLaw = std::variant<DiscreteEndpointLaw, GaussianEndpointLaw>;
using Marginal = std::variant<DiscreteMeasure, GaussianMeasure>;

struct TransportResult {
  double cost = 0.0;  ///< squared W2
  Coupling plan;
};

/// Exact squared 2-Wasserstein distance between discrete measures, with an
/// optimal coupling.
TransportResult w2_discrete(const DiscreteMeasure& a, const DiscreteMeasure& b);

/// Closed-form squared 2-Wasserstein distance between Gaussians.
double w2_gaussian(const GaussianMeasure& a, const GaussianMeasure& b);

/// Squared W2 between two marginals of the same kind.
double w2(const Marginal& a, const Marginal& b);

/// S = S0^{1/2} (S0^{1/2} S1 S0^{1/2})^{1/2} S0^{-1/2}; the inverse is a
/// pseudo-inverse on the range of S0. For Gaussians this is the
/// cross-covariance of the optimal coupling.
Matrix gaussian_cross_term(const Matrix& sigma0, const Matrix& sigma1);

/// Point at time t on the displacement geodesic between two Gaussians.
GaussianMeasure gaussian_geodesic(const GaussianMeasure& a, const GaussianMeasure& b, double t);

/// Marginal at time t of a law on line segments. Atoms closer than
/// kMergeTolerance are merged.
DiscreteMeasure pushforward_line(const DiscreteEndpointLaw& pi, double t);
GaussianMeasure pushforward_line(const GaussianEndpointLaw& pi, double t);
Marginal pushforward_line(const EndpointLaw& pi, double t);

inline constexpr double kMergeTolerance = 1e-12;

/// Builds a measure after merging atoms within `tol` of an earlier atom.
DiscreteMeasure merge_atoms(const Matrix& points, const Vector& weights,
                            double tol = kMergeTolerance);

Eigen::Index dim(const EndpointLaw& pi);

}  // namespace wregress
