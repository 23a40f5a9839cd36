#pragma once

#include <string_view>

#include <Eigen/Dense>

namespace wregress {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace linalg {

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kPsdTolerance = 1e-10;
/// Relative eigenvalue cutoff for pseudo-inverses.
inline constexpr double kPinvCutoff = 1e-12;

bool is_symmetric(const Matrix& m, double tol = kSymmetryTolerance);

double min_eigenvalue(const Matrix& m);

/// Throws InvalidCovarianceError unless `m` is square, symmetric and PSD
/// within the library tolerances.
void require_psd(const Matrix& m, std::string_view what);

/// Principal square root of a symmetric matrix, negative eigenvalues
/// clamped to zero.
Matrix psd_sqrt(const Matrix& m);

/// Pseudo-inverse of psd_sqrt(m); eigenvalues at or below
/// kPinvCutoff * max eigenvalue are treated as zero.
Matrix psd_pinv_sqrt(const Matrix& m);

/// Moore-Penrose pseudo-inverse of a symmetric matrix with the same cutoff.
Matrix sym_pinv(const Matrix& m);

/// Frobenius-nearest PSD matrix: symmetrize, zero the negative eigenvalues.
Matrix project_psd(const Matrix& m);

}  // namespace linalg
}  // namespace wregress
