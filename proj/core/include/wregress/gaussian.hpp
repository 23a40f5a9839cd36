#pragma once

#include <cstddef>
#include <vector>

#include "wregress/measures.hpp"

namespace wregress {

struct GaussianTimedMeasure {
  double t = 0.0;
  GaussianMeasure measure;
};

class GaussianDataset {
 public:
  explicit GaussianDataset(std::vector<GaussianTimedMeasure> entries);

  const std::vector<GaussianTimedMeasure>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  Eigen::Index dim() const { return entries_.front().measure.dim(); }
  std::vector<double> times() const;
  std::size_t distinct_times() const;

 private:
  std::vector<GaussianTimedMeasure> entries_;
};

struct MeanLine {
  Vector m0;
  Vector m1;
};

/// Euclidean least-squares line through the means.
MeanLine fit_means(const GaussianDataset& dataset);

/// Joint covariance of (x0, x1, y_1, ..., y_N); block slot 0 is x0, slot 1
/// is x1 and slot 2 + i is y_i, each d x d.
class JointCovariance {
 public:
  JointCovariance(Matrix matrix, Eigen::Index d);

  const Matrix& matrix() const { return matrix_; }
  Matrix& matrix() { return matrix_; }
  Eigen::Index block_dim() const { return d_; }
  std::size_t data_count() const { return static_cast<std::size_t>(matrix_.rows() / d_) - 2; }

  Matrix block(std::size_t row_slot, std::size_t col_slot) const;

  Matrix c_x0() const { return block(0, 0); }
  Matrix c_x1() const { return block(1, 1); }
  Matrix s_x0x1() const { return block(0, 1); }
  Matrix s_x0y(std::size_t i) const { return block(0, 2 + i); }
  Matrix s_x1y(std::size_t i) const { return block(1, 2 + i); }
  Matrix s_yy(std::size_t i, std::size_t j) const { return block(2 + i, 2 + j); }
  Matrix c_y(std::size_t i) const { return block(2 + i, 2 + i); }

  /// The 2d x 2d law of (x0, x1).
  Matrix endpoint_covariance() const { return matrix_.topLeftCorner(2 * d_, 2 * d_); }

 private:
  Matrix matrix_;
  Eigen::Index d_;
};

/// Linear program over the joint covariance, centered data:
///   min tr(weights * C)  s.t.  C >= 0, C_yi = data covariance i.
/// The y-diagonal blocks of `weights` are zero; adding `constant`
/// (the mean trace of the data covariances) gives the expected squared
/// residual of the joint law.
struct SdpProblem {
  Eigen::Index d = 0;
  std::size_t n = 0;
  std::vector<double> times;
  std::vector<Matrix> data_covariances;

  double coef_cx0 = 0.0;            ///< mean of (1 - t_i)^2
  double coef_cx0_as_printed = 0.0; ///< 1 - 2 tbar + tbar^2, for diagnostics
  double coef_cx1 = 0.0;            ///< mean of t_i^2
  double coef_sx0x1 = 0.0;          ///< 2 (tbar - mean t^2)
  std::vector<double> coef_sx0y;    ///< -(2/N)(1 - t_i)
  std::vector<double> coef_sx1y;    ///< -(2/N) t_i

  Matrix weights;
  double constant = 0.0;

  double objective(const Matrix& joint) const { return (weights.cwiseProduct(joint)).sum(); }
  /// Feasible starting point: zero endpoint blocks, independent data blocks.
  Matrix initial_point() const;
};

SdpProblem build_sdp(const GaussianDataset& dataset);

struct SdpOptions {
  double step_size = 1e-2;
  double max_step_size = 1e3;
  double tolerance = 1e-10;
  std::size_t max_iterations = 200'000;
  std::size_t projection_max_iterations = 2'000;
  double projection_tolerance = 1e-12;
  /// Start from the minimizer of the reduced endpoint-covariance problem
  /// instead of initial_point(); the projected gradient then only polishes.
  bool warm_start = true;
};

/// Mean line plus endpoint covariance blocks; the marginal at t is
/// N((1-t) m0 + t m1, (1-t)^2 C_x0 + t^2 C_x1 + t(1-t)(S + S')).
struct GaussianCurve {
  Vector m0;
  Vector m1;
  Matrix c_x0;
  Matrix c_x1;
  Matrix s_x0x1;

  GaussianEndpointLaw endpoint_law() const;
};

GaussianMeasure gaussian_curve(const GaussianCurve& curve, double t);

struct SdpSolution {
  JointCovariance covariance;
  double objective = 0.0;      ///< SDP objective, constant excluded
  double f_value = 0.0;        ///< (1/N) sum W2^2(curve(t_i), data_i), centered
  std::size_t iterations = 0;
  bool converged = false;
  double final_step_size = 0.0;
  double min_eigenvalue = 0.0;
  std::size_t eigen_solves = 0;  ///< PSD projections spent inside the feasible-set projections
};

/// Projected gradient on the SDP; each projection onto PSD ∩ {fixed data
/// blocks} runs Dykstra's alternating projections.
SdpSolution solve_sdp(const SdpProblem& problem, const SdpOptions& opts = {});

/// (1/N) sum_i W2^2(N(0, cov_t_i), N(0, C_yi)) for a zero-mean curve.
double sdp_regression_cost(const SdpProblem& problem, const GaussianCurve& curve);

struct GeodesicFit {
  double sigma0 = 0.0;
  double sigma1 = 0.0;
  double cost = 0.0;
};

/// Best 1D W2 geodesic: least squares on standard deviations with an affine
/// sigma_t kept nonnegative on [min(0, t_min), max(1, t_max)].
GeodesicFit fit_geodesic_1d(const GaussianDataset& dataset);

struct GaussianRegressionResult {
  MeanLine means;
  SdpProblem problem;
  SdpSolution sdp;
  GaussianCurve curve;
  double total_cost = 0.0;  ///< (1/N) sum W2^2(curve(t_i), mu_i) including means
};

GaussianRegressionResult fit_gaussian_regression(const GaussianDataset& dataset,
                                                 const SdpOptions& opts = {});

}  // namespace wregress
