#include "wregress/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wregress/errors.hpp"

namespace wregress::linalg {

namespace {

Eigen::SelfAdjointEigenSolver<Matrix> eig(const Matrix& m) {
  const Matrix sym = 0.5 * (m + m.transpose());
  return Eigen::SelfAdjointEigenSolver<Matrix>(sym);
}

}  // namespace

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol;
}

double min_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return eig(m).eigenvalues().minCoeff();
}

void require_psd(const Matrix& m, std::string_view what) {
  if (m.rows() != m.cols()) {
    throw InvalidCovarianceError(std::string(what) + ": matrix is not square");
  }
  if (!m.allFinite()) {
    throw InvalidCovarianceError(std::string(what) + ": non-finite entries");
  }
  if (!is_symmetric(m)) {
    throw InvalidCovarianceError(std::string(what) + ": matrix is not symmetric");
  }
  const double lo = min_eigenvalue(m);
  if (lo < -kPsdTolerance) {
    throw InvalidCovarianceError(std::string(what) +
                                 ": matrix is not positive semidefinite (min eigenvalue " +
                                 std::to_string(lo) + ")");
  }
}

Matrix psd_sqrt(const Matrix& m) {
  if (m.size() == 0) return m;
  const auto es = eig(m);
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

Matrix psd_pinv_sqrt(const Matrix& m) {
  if (m.size() == 0) return m;
  const auto es = eig(m);
  const Vector& ev = es.eigenvalues();
  const double cutoff = kPinvCutoff * std::max(ev.maxCoeff(), 0.0);
  Vector inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    inv[i] = ev[i] > cutoff && ev[i] > 0.0 ? 1.0 / std::sqrt(ev[i]) : 0.0;
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Matrix sym_pinv(const Matrix& m) {
  if (m.size() == 0) return m;
  const auto es = eig(m);
  const Vector& ev = es.eigenvalues();
  const double cutoff = kPinvCutoff * ev.cwiseAbs().maxCoeff();
  Vector inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    inv[i] = std::abs(ev[i]) > cutoff && ev[i] != 0.0 ? 1.0 / ev[i] : 0.0;
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

Matrix project_psd(const Matrix& m) {
  if (m.size() == 0) return m;
  const auto es = eig(m);
  const Vector pos = es.eigenvalues().cwiseMax(0.0);
  Matrix out = es.eigenvectors() * pos.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

}  // namespace wregress::linalg
