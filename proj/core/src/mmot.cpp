#include "wregress/mmot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wregress/errors.hpp"
#include "wregress/parallel.hpp"

namespace wregress {

namespace {

constexpr double kWeightTolerance = 1e-12;
constexpr double kJointTolerance = 1e-9;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<std::size_t> strides_of(const std::vector<std::size_t>& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t k = shape.size(); k-- > 1;) s[k - 1] = s[k] * shape[k];
  return s;
}

// The sub-problem on positive-weight atoms, plus the maps needed to embed a
// reduced plan back into the full tensor.
struct Reduced {
  MarginalSpec spec;
  Tensor cost;
  std::vector<std::vector<std::size_t>> kept;
};

Reduced reduce(const Tensor& cost, const MarginalSpec& spec) {
  Reduced out;
  const std::size_t n_axes = spec.axes.size();
  out.kept.resize(n_axes);
  std::vector<std::size_t> shape(n_axes);
  for (std::size_t a = 0; a < n_axes; ++a) {
    const Vector& w = spec.axes[a].weights;
    for (Eigen::Index k = 0; k < w.size(); ++k) {
      if (w[k] > 0.0) out.kept[a].push_back(static_cast<std::size_t>(k));
    }
    if (out.kept[a].empty()) throw InfeasibleError("axis " + std::to_string(a) + " has no mass");
    shape[a] = out.kept[a].size();

    MarginalAxis axis;
    axis.weights.resize(static_cast<Eigen::Index>(shape[a]));
    axis.support.resize(static_cast<Eigen::Index>(shape[a]), spec.axes[a].support.cols());
    for (std::size_t k = 0; k < shape[a]; ++k) {
      const auto src = static_cast<Eigen::Index>(out.kept[a][k]);
      axis.weights[static_cast<Eigen::Index>(k)] = w[src];
      if (spec.axes[a].support.rows() > src) {
        axis.support.row(static_cast<Eigen::Index>(k)) = spec.axes[a].support.row(src);
      }
    }
    out.spec.axes.push_back(std::move(axis));
  }
  for (const auto& pc : spec.pairwise) {
    PairwiseConstraint r;
    r.axis_a = pc.axis_a;
    r.axis_b = pc.axis_b;
    const auto& ka = out.kept[pc.axis_a];
    const auto& kb = out.kept[pc.axis_b];
    r.joint.resize(static_cast<Eigen::Index>(ka.size()), static_cast<Eigen::Index>(kb.size()));
    for (std::size_t i = 0; i < ka.size(); ++i) {
      for (std::size_t j = 0; j < kb.size(); ++j) {
        r.joint(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            pc.joint(static_cast<Eigen::Index>(ka[i]), static_cast<Eigen::Index>(kb[j]));
      }
    }
    out.spec.pairwise.push_back(std::move(r));
  }

  out.cost = Tensor(shape);
  const auto full_strides = strides_of(cost.shape());
  for_each_index(shape, [&](std::span<const std::size_t> idx, std::size_t flat) {
    std::size_t src = 0;
    for (std::size_t a = 0; a < n_axes; ++a) src += out.kept[a][idx[a]] * full_strides[a];
    out.cost[flat] = cost[src];
  });
  return out;
}

Tensor expand(const Tensor& reduced, const Reduced& red, const std::vector<std::size_t>& full_shape) {
  Tensor full(full_shape, 0.0);
  const auto full_strides = strides_of(full_shape);
  for_each_index(reduced.shape(), [&](std::span<const std::size_t> idx, std::size_t flat) {
    std::size_t dst = 0;
    for (std::size_t a = 0; a < idx.size(); ++a) dst += red.kept[a][idx[a]] * full_strides[a];
    full[dst] = reduced[flat];
  });
  return full;
}

void check_cost(const Tensor& cost, const MarginalSpec& spec, std::size_t cap) {
  spec.validate();
  const auto shape = spec.shape();
  checked_volume(shape, cap);
  if (cost.shape() != shape) throw DimensionError("cost tensor shape does not match marginal spec");
  for (double c : cost.data()) {
    if (!std::isfinite(c)) throw NumericalError("cost tensor has non-finite entries");
  }
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::size_t> MarginalSpec::shape() const {
  std::vector<std::size_t> s;
  s.reserve(axes.size());
  for (const auto& a : axes) s.push_back(static_cast<std::size_t>(a.weights.size()));
  return s;
}

void MarginalSpec::validate() const {
  if (axes.empty()) throw DimensionError("marginal spec has no axes");
  for (std::size_t a = 0; a < axes.size(); ++a) {
    const Vector& w = axes[a].weights;
    if (w.size() == 0) throw DimensionError("axis " + std::to_string(a) + " is empty");
    if (!w.allFinite() || (w.array() < 0.0).any()) {
      throw InfeasibleError("axis " + std::to_string(a) + " has negative or non-finite weights");
    }
    if (std::abs(w.sum() - 1.0) > kWeightTolerance) {
      throw InfeasibleError("axis " + std::to_string(a) + " weights do not sum to 1");
    }
  }
  for (const auto& pc : pairwise) {
    if (pc.axis_a >= axes.size() || pc.axis_b >= axes.size() || pc.axis_a == pc.axis_b) {
      throw RangeError("pairwise constraint refers to invalid axes");
    }
    const Vector& wa = axes[pc.axis_a].weights;
    const Vector& wb = axes[pc.axis_b].weights;
    if (pc.joint.rows() != wa.size() || pc.joint.cols() != wb.size()) {
      throw DimensionError("pairwise joint shape does not match its axes");
    }
    if (!pc.joint.allFinite() || (pc.joint.array() < 0.0).any()) {
      throw InfeasibleError("pairwise joint has negative or non-finite entries");
    }
    const double row_err = (pc.joint.rowwise().sum() - wa).cwiseAbs().maxCoeff();
    const double col_err = (pc.joint.colwise().sum().transpose() - wb).cwiseAbs().maxCoeff();
    if (row_err > kJointTolerance || col_err > kJointTolerance) {
      throw InfeasibleError("pairwise joint on axes (" + std::to_string(pc.axis_a) + ", " +
                            std::to_string(pc.axis_b) + ") disagrees with the axis weights");
    }
  }
}

Tensor evaluate_cost(std::span<const std::size_t> shape, const CostFunction& fn,
                     std::size_t size_cap) {
  const std::size_t n = checked_volume(shape, size_cap);
  Tensor cost(std::vector<std::size_t>(shape.begin(), shape.end()));
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> idx(shape.size());
    for (std::size_t flat = begin; flat < end; ++flat) {
      cost.unflatten(flat, idx);
      cost[flat] = fn(idx);
    }
  });
  return cost;
}

// ---------------------------------------------------------------------------
// Exact LP

ExactResult solve_mm_exact(const Tensor& cost, const MarginalSpec& spec, const ExactOptions& opts) {
  check_cost(cost, spec, opts.size_cap);
  const Reduced red = reduce(cost, spec);
  const auto& shape = red.cost.shape();
  const std::size_t n_axes = shape.size();

  // Row layout: one row per atom of every axis, then one row per positive
  // entry of every pairwise joint.
  std::vector<std::size_t> axis_row(n_axes, 0);
  std::size_t rows = 0;
  for (std::size_t a = 0; a < n_axes; ++a) {
    axis_row[a] = rows;
    rows += shape[a];
  }
  std::vector<std::vector<std::size_t>> pair_row(red.spec.pairwise.size());
  for (std::size_t p = 0; p < red.spec.pairwise.size(); ++p) {
    const Matrix& j = red.spec.pairwise[p].joint;
    pair_row[p].assign(static_cast<std::size_t>(j.size()), std::numeric_limits<std::size_t>::max());
    for (Eigen::Index k = 0; k < j.rows(); ++k) {
      for (Eigen::Index l = 0; l < j.cols(); ++l) {
        if (j(k, l) > 0.0) pair_row[p][static_cast<std::size_t>(k * j.cols() + l)] = rows++;
      }
    }
  }

  SparseLinearProgram lp;
  lp.rows = rows;
  lp.rhs.assign(rows, 0.0);
  for (std::size_t a = 0; a < n_axes; ++a) {
    for (std::size_t k = 0; k < shape[a]; ++k) {
      lp.rhs[axis_row[a] + k] = red.spec.axes[a].weights[static_cast<Eigen::Index>(k)];
    }
  }
  for (std::size_t p = 0; p < red.spec.pairwise.size(); ++p) {
    const Matrix& j = red.spec.pairwise[p].joint;
    for (Eigen::Index k = 0; k < j.rows(); ++k) {
      for (Eigen::Index l = 0; l < j.cols(); ++l) {
        const std::size_t r = pair_row[p][static_cast<std::size_t>(k * j.cols() + l)];
        if (r != std::numeric_limits<std::size_t>::max()) lp.rhs[r] = j(k, l);
      }
    }
  }

  std::vector<std::size_t> column_entry;  // column -> flat tensor index
  std::vector<std::pair<std::size_t, double>> entries;
  for_each_index(shape, [&](std::span<const std::size_t> idx, std::size_t flat) {
    entries.clear();
    for (std::size_t a = 0; a < n_axes; ++a) entries.emplace_back(axis_row[a] + idx[a], 1.0);
    for (std::size_t p = 0; p < red.spec.pairwise.size(); ++p) {
      const auto& pc = red.spec.pairwise[p];
      const std::size_t key = idx[pc.axis_a] * static_cast<std::size_t>(pc.joint.cols()) + idx[pc.axis_b];
      const std::size_t r = pair_row[p][key];
      if (r == std::numeric_limits<std::size_t>::max()) return;  // forced to zero
      entries.emplace_back(r, 1.0);
    }
    lp.add_column(red.cost[flat], entries);
    column_entry.push_back(flat);
  });

  const SimplexResult sol = solve_simplex(lp, opts.simplex);

  Tensor reduced_plan(shape, 0.0);
  for (std::size_t c = 0; c < column_entry.size(); ++c) reduced_plan[column_entry[c]] = sol.x[c];

  ExactResult out;
  out.plan.tensor = expand(reduced_plan, red, spec.shape());
  out.plan.axes = spec.axes;
  out.value = dot(out.plan.tensor, cost);
  out.iterations = sol.iterations;
  return out;
}

ExactResult solve_mm_exact(const CostFunction& cost, const MarginalSpec& spec,
                           const ExactOptions& opts) {
  spec.validate();
  return solve_mm_exact(evaluate_cost(spec.shape(), cost, opts.size_cap), spec, opts);
}

// ---------------------------------------------------------------------------
// Entropic (log-domain Bregman projections)

namespace {

class BregmanProjector {
 public:
  BregmanProjector(const Tensor& cost, const MarginalSpec& spec, double epsilon)
      : spec_(spec), shape_(cost.shape()), strides_(strides_of(cost.shape())), log_plan_(cost.shape()) {
    for (std::size_t i = 0; i < cost.size(); ++i) log_plan_[i] = -cost[i] / epsilon;
    // Zero entries of a pairwise joint pin the matching tensor entries to zero.
    for (const auto& pc : spec_.pairwise) {
      for_each_index(shape_, [&](std::span<const std::size_t> idx, std::size_t flat) {
        if (pc.joint(static_cast<Eigen::Index>(idx[pc.axis_a]),
                     static_cast<Eigen::Index>(idx[pc.axis_b])) <= 0.0) {
          log_plan_[flat] = kNegInf;
        }
      });
    }
  }

  std::size_t constraint_count() const { return spec_.axes.size() + spec_.pairwise.size(); }

  /// KL projection onto constraint c; returns the pre-projection violation.
  double project(std::size_t c) {
    const auto [keys, target] = slice(c);
    const std::size_t n_keys = target.size();
    std::vector<double> peak(n_keys, kNegInf);
    for (std::size_t i = 0; i < log_plan_.size(); ++i) {
      const std::size_t k = keys(i);
      peak[k] = std::max(peak[k], log_plan_[i]);
    }
    std::vector<double> acc(n_keys, 0.0);
    for (std::size_t i = 0; i < log_plan_.size(); ++i) {
      const std::size_t k = keys(i);
      if (peak[k] != kNegInf) acc[k] += std::exp(log_plan_[i] - peak[k]);
    }
    std::vector<double> shift(n_keys, 0.0);
    double violation = 0.0;
    for (std::size_t k = 0; k < n_keys; ++k) {
      if (target[k] <= 0.0) continue;
      if (peak[k] == kNegInf) {
        throw NumericalError("entropic solver: constraint slice has no support");
      }
      const double log_mass = peak[k] + std::log(acc[k]);
      if (!std::isfinite(log_mass)) throw NumericalError("entropic solver: non-finite marginal");
      violation = std::max(violation, std::abs(std::exp(log_mass) - target[k]));
      shift[k] = std::log(target[k]) - log_mass;
    }
    for (std::size_t i = 0; i < log_plan_.size(); ++i) log_plan_[i] += shift[keys(i)];
    return violation;
  }

  double violation(std::size_t c) const {
    const auto [keys, target] = slice(c);
    std::vector<double> mass(target.size(), 0.0);
    for (std::size_t i = 0; i < log_plan_.size(); ++i) mass[keys(i)] += std::exp(log_plan_[i]);
    double v = 0.0;
    for (std::size_t k = 0; k < target.size(); ++k) v = std::max(v, std::abs(mass[k] - target[k]));
    return v;
  }

  // log plan = (potentials - cost) / eps, so changing eps scales it
  void rescale(double factor) {
    for (auto& v : log_plan_.data()) v *= factor;
  }

  Tensor plan() const {
    Tensor out(shape_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(log_plan_[i]);
    return out;
  }

 private:
  struct Slice {
    std::function<std::size_t(std::size_t)> key;
    std::size_t operator()(std::size_t flat) const { return key(flat); }
  };

  std::pair<Slice, std::vector<double>> slice(std::size_t c) const {
    const std::size_t n_axes = spec_.axes.size();
    if (c < n_axes) {
      const std::size_t stride = strides_[c];
      const std::size_t n = shape_[c];
      const Vector& w = spec_.axes[c].weights;
      return {Slice{[stride, n](std::size_t flat) { return (flat / stride) % n; }},
              std::vector<double>(w.data(), w.data() + w.size())};
    }
    const auto& pc = spec_.pairwise[c - n_axes];
    const std::size_t sa = strides_[pc.axis_a], na = shape_[pc.axis_a];
    const std::size_t sb = strides_[pc.axis_b], nb = shape_[pc.axis_b];
    std::vector<double> target(na * nb);
    for (std::size_t k = 0; k < na; ++k) {
      for (std::size_t l = 0; l < nb; ++l) {
        target[k * nb + l] = pc.joint(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(l));
      }
    }
    return {Slice{[sa, na, sb, nb](std::size_t flat) {
              return ((flat / sa) % na) * nb + (flat / sb) % nb;
            }},
            std::move(target)};
  }

  const MarginalSpec& spec_;
  std::vector<std::size_t> shape_;
  std::vector<std::size_t> strides_;
  Tensor log_plan_;
};

}  // namespace

EntropicResult solve_mm_entropic(const Tensor& cost, const MarginalSpec& spec,
                                 const EntropicOptions& opts) {
  if (!(opts.epsilon > 0.0)) throw RangeError("entropic solver: epsilon must be positive");
  if (!(opts.tolerance > 0.0)) throw RangeError("entropic solver: tolerance must be positive");
  check_cost(cost, spec, opts.size_cap);
  const Reduced red = reduce(cost, spec);

  // Epsilon scaling: anneal from the cost range down to epsilon, warm
  // starting each stage. Same fixed point, far fewer sweeps for small eps.
  double range = 0.0;
  for (std::size_t i = 0; i < red.cost.size(); ++i) range = std::max(range, std::abs(red.cost[i]));
  double eps = std::max(opts.epsilon, range);
  BregmanProjector proj(red.cost, red.spec, eps);
  const std::size_t n_constraints = proj.constraint_count();

  EntropicResult out;
  double worst = std::numeric_limits<double>::infinity();
  while (eps > opts.epsilon && out.iterations < opts.max_iterations) {
    const double stage_tol = std::max(opts.tolerance, 1e-6);
    for (std::size_t k = 0; k < 1000 && out.iterations < opts.max_iterations; ++k) {
      double v = 0.0;
      for (std::size_t c = 0; c < n_constraints; ++c) v = std::max(v, proj.project(c));
      ++out.iterations;
      if (v < stage_tol) break;
    }
    const double next = std::max(opts.epsilon, eps * 0.5);
    proj.rescale(eps / next);
    eps = next;
  }
  while (out.iterations < opts.max_iterations) {
    for (std::size_t c = 0; c < n_constraints; ++c) proj.project(c);
    ++out.iterations;
    worst = 0.0;
    for (std::size_t c = 0; c + 1 < n_constraints; ++c) worst = std::max(worst, proj.violation(c));
    if (!std::isfinite(worst)) throw NumericalError("entropic solver: non-finite iterate");
    if (worst < opts.tolerance) {
      out.converged = true;
      break;
    }
  }
  out.max_violation = worst;
  out.plan.tensor = expand(proj.plan(), red, spec.shape());
  out.plan.axes = spec.axes;
  out.value = dot(out.plan.tensor, cost);
  return out;
}

EntropicResult solve_mm_entropic(const CostFunction& cost, const MarginalSpec& spec,
                                 const EntropicOptions& opts) {
  spec.validate();
  return solve_mm_entropic(evaluate_cost(spec.shape(), cost, opts.size_cap), spec, opts);
}

// ---------------------------------------------------------------------------

Tensor mm_marginal(const Tensor& tensor, std::span<const std::size_t> axes) {
  const auto& shape = tensor.shape();
  std::vector<char> seen(shape.size(), 0);
  std::vector<std::size_t> out_shape;
  for (std::size_t a : axes) {
    if (a >= shape.size()) throw RangeError("mm_marginal: axis index out of range");
    if (seen[a]) throw RangeError("mm_marginal: duplicate axis");
    seen[a] = 1;
    out_shape.push_back(shape[a]);
  }
  Tensor out(out_shape, 0.0);
  const auto out_strides = strides_of(out_shape);
  for_each_index(shape, [&](std::span<const std::size_t> idx, std::size_t flat) {
    std::size_t dst = 0;
    for (std::size_t k = 0; k < axes.size(); ++k) dst += idx[axes[k]] * out_strides[k];
    out[dst] += tensor[flat];
  });
  return out;
}

Tensor mm_marginal(const MultimarginalPlan& plan, std::span<const std::size_t> axes) {
  return mm_marginal(plan.tensor, axes);
}

}  // namespace wregress
