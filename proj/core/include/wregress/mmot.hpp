#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "wregress/linalg.hpp"
#include "wregress/simplex.hpp"
#include "wregress/tensor.hpp"

namespace wregress {

/// One marginal of a multimarginal problem. `support` rows are the atoms;
/// the solvers only read `weights`, the support is carried for callers.
struct MarginalAxis {
  Matrix support;
  Vector weights;
};

/// Prescribed joint law of two axes; joint(k, l) is the mass on
/// (atom k of axis_a, atom l of axis_b).
struct PairwiseConstraint {
  std::size_t axis_a = 0;
  std::size_t axis_b = 0;
  Matrix joint;
};

struct MarginalSpec {
  std::vector<MarginalAxis> axes;
  std::vector<PairwiseConstraint> pairwise;

  std::vector<std::size_t> shape() const;
  /// Throws DimensionError / RangeError on malformed input and
  /// InfeasibleError when a joint disagrees with its axis weights.
  void validate() const;
};

struct MultimarginalPlan {
  Tensor tensor;
  std::vector<MarginalAxis> axes;
};

using CostFunction = std::function<double(std::span<const std::size_t>)>;

inline constexpr std::size_t kDefaultSizeCap = 1'000'000;

/// Dense cost tensor; `fn` must be safe to call concurrently.
Tensor evaluate_cost(std::span<const std::size_t> shape, const CostFunction& fn,
                     std::size_t size_cap = kDefaultSizeCap);

struct ExactOptions {
  std::size_t size_cap = kDefaultSizeCap;
  SimplexOptions simplex;
};

struct ExactResult {
  MultimarginalPlan plan;
  double value = 0.0;
  std::size_t iterations = 0;
};

/// Exact multimarginal transport: the linear program over the dense coupling
/// tensor with every axis marginal and pairwise joint imposed.
ExactResult solve_mm_exact(const Tensor& cost, const MarginalSpec& spec,
                           const ExactOptions& opts = {});
ExactResult solve_mm_exact(const CostFunction& cost, const MarginalSpec& spec,
                           const ExactOptions& opts = {});

struct EntropicOptions {
  double epsilon = 1e-2;
  double tolerance = 1e-8;
  std::size_t max_iterations = 100'000;
  std::size_t size_cap = kDefaultSizeCap;
};

struct EntropicResult {
  MultimarginalPlan plan;
  double value = 0.0;  ///< unregularized <cost, plan>
  std::size_t iterations = 0;
  bool converged = false;
  double max_violation = 0.0;
};

/// Entropically regularized multimarginal transport by cyclic KL (Bregman)
/// projections in the log domain. Stops once every marginal and pairwise
/// constraint holds within `tolerance` (max absolute deviation).
EntropicResult solve_mm_entropic(const Tensor& cost, const MarginalSpec& spec,
                                 const EntropicOptions& opts);
EntropicResult solve_mm_entropic(const CostFunction& cost, const MarginalSpec& spec,
                                 const EntropicOptions& opts);

/// Sums `tensor` over every axis not listed; the result's axes follow `axes`.
Tensor mm_marginal(const Tensor& tensor, std::span<const std::size_t> axes);
Tensor mm_marginal(const MultimarginalPlan& plan, std::span<const std::size_t> axes);

}  // namespace wregress
