#include <gtest/gtest.h>

#include <random>

#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "wregress/errors.hpp"
#include "wregress/mmot.hpp"

using namespace wregress;

namespace {

MarginalAxis axis_of(const DiscreteMeasure& m) { return {m.points(), m.weights()}; }

MarginalSpec spec_of(const std::vector<DiscreteMeasure>& ms) {
  MarginalSpec s;
  for (const auto& m : ms) s.axes.push_back(axis_of(m));
  return s;
}

Tensor squared_distance_cost(const MarginalSpec& spec) {
  // pairwise squared distances summed over all axis pairs
  const auto shape = spec.shape();
  Tensor c(shape);
  for_each_index(shape, [&](std::span<const std::size_t> idx, std::size_t flat) {
    double v = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = a + 1; b < idx.size(); ++b)
        v += (spec.axes[a].support.row(static_cast<Eigen::Index>(idx[a])) -
              spec.axes[b].support.row(static_cast<Eigen::Index>(idx[b])))
                 .squaredNorm();
    c[flat] = v;
  });
  return c;
}

Tensor random_cost(const std::vector<std::size_t>& shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor c(shape);
  for (auto& v : c.data()) v = u(rng);
  return c;
}

std::vector<Vector> weights_of(const MarginalSpec& s) {
  std::vector<Vector> w;
  for (const auto& a : s.axes) w.push_back(a.weights);
  return w;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void expect_marginals(const Tensor& plan, const MarginalSpec& spec, double tol) {
  for (std::size_t k = 0; k < spec.axes.size(); ++k) {
    const std::size_t ax[] = {k};
    const Tensor m = mm_marginal(plan, ax);
    for (Eigen::Index i = 0; i < spec.axes[k].weights.size(); ++i)
      EXPECT_NEAR(m[static_cast<std::size_t>(i)], spec.axes[k].weights[i], tol) << "axis " << k;
  }
}

}  // namespace

TEST(SolveMmExact, SingleAxisIsTheMarginal) {
  std::mt19937_64 rng(1);
  const auto m = gen::random_measure(4, 1, rng);
  const MarginalSpec spec = spec_of({m});
  const Tensor cost = random_cost(spec.shape(), rng);
  const auto r = solve_mm_exact(cost, spec);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(r.plan.tensor[i], m.weight(static_cast<Eigen::Index>(i)), 1e-12);
  EXPECT_NEAR(r.value, dot(cost, r.plan.tensor), 1e-12);
}

TEST(SolveMmExact, TwoAxesAgreesWithPairwiseDistance) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 10; ++k) {
    const auto a = gen::random_measure(2 + k % 4, 2, rng), b = gen::random_measure(3 + k % 3, 2, rng);
    const MarginalSpec spec = spec_of({a, b});
    EXPECT_NEAR(solve_mm_exact(squared_distance_cost(spec), spec).value, w2_discrete(a, b).cost, 1e-9);
  }
}

TEST(SolveMmExact, ZeroCost) {
  std::mt19937_64 rng(3);
  const MarginalSpec spec = spec_of({gen::random_measure(2, 1, rng), gen::random_measure(2, 1, rng)});
  const auto r = solve_mm_exact(Tensor(spec.shape(), 0.0), spec);
  EXPECT_EQ(r.value, 0.0);
  expect_marginals(r.plan.tensor, spec, 1e-12);
}

TEST(SolveMmExact, MatchesVertexEnumeration) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 8; ++k) {
    MarginalSpec spec;
    for (std::size_t n : {2, 2, 3}) spec.axes.push_back({oracle::random_points(n, 1, rng), oracle::random_weights(n, rng)});
    const Tensor cost = random_cost(spec.shape(), rng);
    const auto r = solve_mm_exact(cost, spec);
    const auto bf = oracle::brute_force_transport(cost, weights_of(spec));
    EXPECT_NEAR(r.value, bf.value, 1e-9);
    expect_marginals(r.plan.tensor, spec, 1e-9);
    EXPECT_GE(*std::min_element(r.plan.tensor.data().begin(), r.plan.tensor.data().end()), -1e-12);
  }
}

TEST(SolveMmExact, NeverWorseThanARandomCoupling) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 5; ++k) {
    MarginalSpec spec;
    for (std::size_t n : {3, 2, 4, 2}) spec.axes.push_back({oracle::random_points(n, 1, rng), oracle::random_weights(n, rng)});
    const Tensor cost = squared_distance_cost(spec);
    const double best = solve_mm_exact(cost, spec).value;
    EXPECT_LE(best, dot(cost, oracle::random_feasible_plan(weights_of(spec), rng)) + 1e-10);
  }
}

TEST(SolveMmExact, CostFunctionOverloadMatchesTensor) {
  std::mt19937_64 rng(6);
  MarginalSpec spec;
  for (std::size_t n : {3, 3, 2}) spec.axes.push_back({oracle::random_points(n, 1, rng), oracle::random_weights(n, rng)});
  const Tensor cost = squared_distance_cost(spec);
  const auto by_fn = solve_mm_exact([&](std::span<const std::size_t> idx) { return cost.at(idx); }, spec);
  EXPECT_NEAR(by_fn.value, solve_mm_exact(cost, spec).value, 1e-12);
}

TEST(SolveMmExact, PairwiseConstraintIsHonoured) {
  std::mt19937_64 rng(7);
  MarginalSpec spec;
  for (std::size_t n : {2, 2, 3}) spec.axes.push_back({oracle::random_points(n, 1, rng), oracle::random_weights(n, rng)});
  // the product coupling is always a valid joint for axes 0 and 1
  PairwiseConstraint pc{0, 1, spec.axes[0].weights * spec.axes[1].weights.transpose()};
  spec.pairwise.push_back(pc);
  const auto r = solve_mm_exact(random_cost(spec.shape(), rng), spec);
  const std::size_t ax[] = {0, 1};
  const Tensor m = mm_marginal(r.plan.tensor, ax);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      EXPECT_NEAR(m[i * 2 + j], pc.joint(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), 1e-9);
}

TEST(SolveMmExact, InconsistentPairwiseIsInfeasible) {
  MarginalSpec spec;
  spec.axes.push_back({Matrix::Constant(2, 1, 0.0), Vector::Constant(2, 0.5)});
  spec.axes.push_back({Matrix::Constant(2, 1, 1.0), Vector::Constant(2, 0.5)});
  Matrix joint(2, 2);
  joint << 0.7, 0.0, 0.0, 0.3;  // row sums disagree with the axis weights
  spec.pairwise.push_back({0, 1, joint});
  EXPECT_THROW(solve_mm_exact(Tensor(spec.shape(), 0.0), spec), InfeasibleError);
}

TEST(SolveMmExact, SizeCap) {
  MarginalSpec spec;
  for (int k = 0; k < 4; ++k) spec.axes.push_back({Matrix::Zero(10, 1), Vector::Constant(10, 0.1)});
  ExactOptions opts;
  opts.size_cap = 9999;
  EXPECT_THROW(solve_mm_exact([](std::span<const std::size_t>) { return 0.0; }, spec, opts), SizeCapError);
}

TEST(SolveMmEntropic, BiMarginalCloseToExact) {
  const DiscreteMeasure a(Matrix((Matrix(3, 1) << 0, 1, 3).finished()), Vector::Constant(3, 1.0 / 3));
  const DiscreteMeasure b(Matrix((Matrix(3, 1) << 0.5, 2, 2.5).finished()), Vector::Constant(3, 1.0 / 3));
  const MarginalSpec spec = spec_of({a, b});
  EntropicOptions opts;
  opts.epsilon = 1e-3;
  const auto r = solve_mm_entropic(squared_distance_cost(spec), spec, opts);
  const double exact = w2_discrete(a, b).cost;
  EXPECT_TRUE(r.converged) << r.iterations;
  EXPECT_NEAR(r.value, exact, 0.01 * exact);
  EXPECT_LE(r.max_violation, 1e-6);
}

TEST(SolveMmEntropic, GapShrinksWithEpsilon) {
  std::mt19937_64 rng(8);
  MarginalSpec spec;
  for (std::size_t n : {3, 4, 3}) spec.axes.push_back({oracle::random_points(n, 1, rng, 2.0), oracle::random_weights(n, rng)});
  const Tensor cost = squared_distance_cost(spec);
  const double exact = solve_mm_exact(cost, spec).value;
  double prev = 1e300;
  for (double eps : {0.5, 0.1, 0.02}) {
    EntropicOptions opts;
    opts.epsilon = eps;
    const auto r = solve_mm_entropic(cost, spec, opts);
    EXPECT_GE(r.value, exact - 1e-6);
    expect_marginals(r.plan.tensor, spec, 1e-6);
    EXPECT_LE(r.value - exact, prev + 1e-9);
    prev = r.value - exact;
  }
}

TEST(SolveMmEntropic, IterationBudgetReportsNonConvergence) {
  std::mt19937_64 rng(9);
  MarginalSpec spec;
  for (std::size_t n : {4, 4}) spec.axes.push_back({oracle::random_points(n, 1, rng, 3.0), oracle::random_weights(n, rng)});
  EntropicOptions opts;
  opts.epsilon = 1e-3;
  opts.tolerance = 1e-14;
  opts.max_iterations = 2;
  const auto r = solve_mm_entropic(squared_distance_cost(spec), spec, opts);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 2u);
}

TEST(SolveMmEntropic, RejectsNonPositiveEpsilon) {
  MarginalSpec spec;
  spec.axes.push_back({Matrix::Zero(1, 1), Vector::Ones(1)});
  EntropicOptions opts;
  opts.epsilon = 0.0;
  EXPECT_ANY_THROW(solve_mm_entropic(Tensor(spec.shape(), 0.0), spec, opts));
}

TEST(MmMarginal, AllAxesReturnsTensor) {
  std::mt19937_64 rng(10);
  const Tensor t = random_cost({2, 3, 2}, rng);
  const std::size_t ax[] = {0, 1, 2};
  EXPECT_EQ(mm_marginal(t, ax).data(), t.data());
}

TEST(MmMarginal, ProductPlan) {
  const Vector a = (Vector(2) << 0.25, 0.75).finished(), b = (Vector(3) << 0.2, 0.3, 0.5).finished();
  Tensor t({2, 3});
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) t[i * 3 + j] = a[static_cast<Eigen::Index>(i)] * b[static_cast<Eigen::Index>(j)];
  const std::size_t ax1[] = {1};
  const Tensor m = mm_marginal(t, ax1);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(m[j], b[static_cast<Eigen::Index>(j)], 1e-15);
}

TEST(MmMarginal, TransposedAxesOrder) {
  Tensor t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const std::size_t ax[] = {1, 0};
  const Tensor m = mm_marginal(t, ax);
  ASSERT_EQ(m.shape(), (std::vector<std::size_t>{3, 2}));
  EXPECT_EQ(m[1], 4.0);  // entry (0, 1) of the transpose
}

TEST(MmMarginal, BadAxis) {
  const Tensor t({2, 2}, 0.25);
  const std::size_t ax[] = {2};
  EXPECT_THROW(mm_marginal(t, ax), RangeError);
}
