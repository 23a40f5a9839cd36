#include "wregress/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "wregress/errors.hpp"

namespace wregress {

void SparseLinearProgram::add_column(double c,
                                     const std::vector<std::pair<std::size_t, double>>& entries) {
  cost.push_back(c);
  for (const auto& [r, v] : entries) {
    row_index.push_back(r);
    value.push_back(v);
  }
  column_start.push_back(row_index.size());
}

namespace {

using Index = Eigen::Index;
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

class RevisedSimplex {
 public:
  RevisedSimplex(const SparseLinearProgram& lp, const SimplexOptions& opts)
      : lp_(lp), opts_(opts), m_(lp.rows), n_(lp.columns()) {
    if (lp.rhs.size() != m_) throw DimensionError("simplex: rhs size does not match row count");
    if (lp.column_start.size() != n_ + 1) throw DimensionError("simplex: malformed column index");
    sign_.assign(m_, 1.0);
    b_ = Eigen::VectorXd(static_cast<Index>(m_));
    for (std::size_t r = 0; r < m_; ++r) {
      if (lp.rhs[r] < 0.0) sign_[r] = -1.0;
      b_[static_cast<Index>(r)] = sign_[r] * lp.rhs[r];
    }
    double cmax = 1.0;
    for (double c : lp.cost) cmax = std::max(cmax, std::abs(c));
    opt_tol_ = opts.optimality_tolerance * cmax;
  }

  SimplexResult run() {
    // Phase 1 from the all-artificial basis.
    basic_.resize(m_);
    position_.assign(n_ + m_, kNone);
    for (std::size_t r = 0; r < m_; ++r) {
      basic_[r] = n_ + r;
      position_[n_ + r] = r;
    }
    binv_ = Eigen::MatrixXd::Identity(static_cast<Index>(m_), static_cast<Index>(m_));
    xb_ = b_;

    phase_ = 1;
    iterate();
    double infeasibility = 0.0;
    for (std::size_t r = 0; r < m_; ++r) {
      if (is_artificial(basic_[r])) infeasibility += std::max(0.0, xb_[static_cast<Index>(r)]);
    }
    if (infeasibility > opts_.feasibility_tolerance) {
      throw InfeasibleError("linear program is infeasible (phase-1 residual " +
                            std::to_string(infeasibility) + ")");
    }
    drive_out_artificials();

    phase_ = 2;
    iterate();
    refactor();

    SimplexResult out;
    out.x.assign(n_, 0.0);
    for (std::size_t r = 0; r < m_; ++r) {
      const std::size_t j = basic_[r];
      if (j < n_) out.x[j] = std::max(0.0, xb_[static_cast<Index>(r)]);
    }
    for (std::size_t j = 0; j < n_; ++j) out.objective += lp_.cost[j] * out.x[j];
    out.iterations = iterations_;
    return out;
  }

 private:
  bool is_artificial(std::size_t j) const { return j >= n_; }

  double cost_of(std::size_t j) const {
    if (phase_ == 1) return is_artificial(j) ? 1.0 : 0.0;
    return is_artificial(j) ? 0.0 : lp_.cost[j];
  }

  // u = B^{-1} A_j
  Eigen::VectorXd ftran(std::size_t j) const {
    if (is_artificial(j)) return binv_.col(static_cast<Index>(j - n_));
    Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Index>(m_));
    for (std::size_t k = lp_.column_start[j]; k < lp_.column_start[j + 1]; ++k) {
      const std::size_t r = lp_.row_index[k];
      u += (sign_[r] * lp_.value[k]) * binv_.col(static_cast<Index>(r));
    }
    return u;
  }

  double dot_column(const Eigen::VectorXd& y, std::size_t j) const {
    double s = 0.0;
    for (std::size_t k = lp_.column_start[j]; k < lp_.column_start[j + 1]; ++k) {
      const std::size_t r = lp_.row_index[k];
      s += y[static_cast<Index>(r)] * sign_[r] * lp_.value[k];
    }
    return s;
  }

  void refactor() {
    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(static_cast<Index>(m_), static_cast<Index>(m_));
    for (std::size_t r = 0; r < m_; ++r) {
      const std::size_t j = basic_[r];
      const Index c = static_cast<Index>(r);
      if (is_artificial(j)) {
        basis(static_cast<Index>(j - n_), c) = 1.0;
      } else {
        for (std::size_t k = lp_.column_start[j]; k < lp_.column_start[j + 1]; ++k) {
          const std::size_t row = lp_.row_index[k];
          basis(static_cast<Index>(row), c) += sign_[row] * lp_.value[k];
        }
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis);
    binv_ = lu.inverse();
    xb_ = binv_ * b_;
    for (Index r = 0; r < xb_.size(); ++r) {
      if (xb_[r] < 0.0 && xb_[r] > -opts_.feasibility_tolerance) xb_[r] = 0.0;
    }
    if (!binv_.allFinite()) throw NumericalError("simplex: basis became singular");
    since_refactor_ = 0;
  }

  void pivot(std::size_t leave_row, std::size_t enter, const Eigen::VectorXd& u) {
    const Index r = static_cast<Index>(leave_row);
    const double piv = u[r];
    const double theta = xb_[r] / piv;
    xb_ -= theta * u;
    xb_[r] = theta;
    binv_.row(r) /= piv;
    for (Index i = 0; i < binv_.rows(); ++i) {
      if (i != r && u[i] != 0.0) binv_.row(i) -= u[i] * binv_.row(r);
    }
    position_[basic_[leave_row]] = kNone;
    basic_[leave_row] = enter;
    position_[enter] = leave_row;
    ++iterations_;
    if (++since_refactor_ >= opts_.refactor_interval) refactor();
  }

  void iterate() {
    std::size_t degenerate_streak = 0;
    for (;;) {
      if (iterations_ >= opts_.max_iterations) {
        throw NumericalError("simplex: iteration limit reached");
      }
      const bool bland = degenerate_streak > 2 * m_ + 20;

      Eigen::VectorXd cb(static_cast<Index>(m_));
      for (std::size_t r = 0; r < m_; ++r) cb[static_cast<Index>(r)] = cost_of(basic_[r]);
      const Eigen::VectorXd y = binv_.transpose() * cb;

      std::size_t enter = kNone;
      double best = -opt_tol_;
      for (std::size_t j = 0; j < n_; ++j) {
        if (position_[j] != kNone) continue;
        const double d = cost_of(j) - dot_column(y, j);
        if (d < best) {
          best = d;
          enter = j;
          if (bland) break;
        }
      }
      if (enter == kNone) return;

      const Eigen::VectorXd u = ftran(enter);
      std::size_t leave = kNone;
      double min_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < m_; ++r) {
        const double ur = u[static_cast<Index>(r)];
        if (ur <= opts_.pivot_tolerance) continue;
        const double ratio = std::max(0.0, xb_[static_cast<Index>(r)]) / ur;
        if (leave == kNone || ratio < min_ratio - 1e-13) {
          min_ratio = ratio;
          leave = r;
        } else if (ratio <= min_ratio + 1e-13) {
          // Prefer artificials, then (Bland) smallest index or largest pivot.
          const bool art_new = is_artificial(basic_[r]);
          const bool art_old = is_artificial(basic_[leave]);
          if (art_new != art_old) {
            if (art_new) leave = r;
          } else if (bland ? basic_[r] < basic_[leave] : ur > u[static_cast<Index>(leave)]) {
            leave = r;
          }
          min_ratio = std::min(min_ratio, ratio);
        }
      }
      if (leave == kNone) throw NumericalError("simplex: linear program is unbounded");
      degenerate_streak = min_ratio <= 1e-14 ? degenerate_streak + 1 : 0;
      pivot(leave, enter, u);
    }
  }

  void drive_out_artificials() {
    for (std::size_t r = 0; r < m_; ++r) {
      if (!is_artificial(basic_[r])) continue;
      const Eigen::VectorXd row = binv_.row(static_cast<Index>(r)).transpose();
      std::size_t enter = kNone;
      double best = 1e-7;
      for (std::size_t j = 0; j < n_; ++j) {
        if (position_[j] != kNone) continue;
        const double v = std::abs(dot_column(row, j));
        if (v > best) {
          best = v;
          enter = j;
        }
      }
      if (enter == kNone) continue;  // redundant row; the artificial stays at zero
      const Eigen::VectorXd u = ftran(enter);
      // Degenerate pivot: the artificial sits at (numerically) zero level.
      xb_[static_cast<Index>(r)] = 0.0;
      pivot(r, enter, u);
    }
    refactor();
  }

  const SparseLinearProgram& lp_;
  const SimplexOptions& opts_;
  std::size_t m_;
  std::size_t n_;
  std::vector<double> sign_;
  Eigen::VectorXd b_;
  double opt_tol_ = 0.0;

  std::vector<std::size_t> basic_;
  std::vector<std::size_t> position_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd xb_;
  int phase_ = 1;
  std::size_t iterations_ = 0;
  std::size_t since_refactor_ = 0;
};

}  // namespace

SimplexResult solve_simplex(const SparseLinearProgram& lp, const SimplexOptions& opts) {
  if (lp.rows == 0) {
    SimplexResult out;
    out.x.assign(lp.columns(), 0.0);
    return out;
  }
  return RevisedSimplex(lp, opts).run();
}

}  // namespace wregress
