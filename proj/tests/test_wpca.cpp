#include <gtest/gtest.h>

#include <random>

#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "wregress/errors.hpp"
#include "wregress/wpca.hpp"

using namespace wregress;

namespace {

SupportTuple single_line(double x0, double x1, std::size_t n) {
  return {std::vector<std::size_t>(n, 0), 1.0, Vector::Constant(1, x0), Vector::Constant(1, x1)};
}

DiscreteMeasure dirac1(double x) { return DiscreteMeasure::dirac(Vector::Constant(1, x)); }

}  // namespace

TEST(UpdateTimes, ProjectionOntoSegment) {
  const std::vector<SupportTuple> s{single_line(0, 1, 1)};
  EXPECT_NEAR(update_times(s, {dirac1(0.5)})[0], 0.5, 1e-15);
}

TEST(UpdateTimes, BeyondTheSegment) {
  const std::vector<SupportTuple> s{single_line(0, 2, 1)};
  EXPECT_NEAR(update_times(s, {dirac1(3.0)})[0], 1.5, 1e-15);
}

TEST(UpdateTimes, DegenerateLineGivesZero) {
  const std::vector<SupportTuple> s{single_line(0.7, 0.7, 2)};
  const auto t = update_times(s, {dirac1(3.0), dirac1(-1.0)});
  EXPECT_EQ(t[0], 0.0);
  EXPECT_EQ(t[1], 0.0);
}

TEST(UpdateTimes, MinimizesLineObjective) {
  std::mt19937_64 rng(1);
  const std::vector<DiscreteMeasure> ms{gen::random_measure(2, 2, rng), gen::random_measure(3, 2, rng),
                                        gen::random_measure(2, 2, rng)};
  PcaOptions opts;
  opts.max_iterations = 1;
  const auto st = fit_pca(ms, opts);
  const auto t = update_times(st.law.support, ms);
  const double best = line_objective(st.law.support, ms, t);
  for (std::size_t i = 0; i < t.size(); ++i)
    for (double h : {-1e-3, 1e-3}) {
      auto u = t;
      u[i] += h;
      EXPECT_GE(line_objective(st.law.support, ms, u), best - 1e-14);
    }
}

TEST(FitPca, DiracsOnALine) {
  std::mt19937_64 rng(2);
  const Vector dir = (Vector(2) << 0.6, 0.8).finished(), base = (Vector(2) << 1.0, -1.0).finished();
  std::vector<DiscreteMeasure> ms;
  Matrix pts(5, 2);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 5; ++i) {
    pts.row(i) = (base + n01(rng) * dir).transpose();
    ms.push_back(DiscreteMeasure::dirac(pts.row(i).transpose()));
  }
  const auto st = fit_pca(ms);
  EXPECT_NEAR(st.objective, 0.0, 1e-12);
  ASSERT_EQ(st.law.pi.size(), 1);
  Vector got = (st.law.pi.x1().row(0) - st.law.pi.x0().row(0)).transpose();
  ASSERT_GT(got.norm(), 1e-9);
  got.normalize();
  EXPECT_NEAR(std::abs(got.dot(oracle::principal_axis(pts))), 1.0, 1e-6);
}

TEST(FitPca, IdenticalMeasures) {
  std::mt19937_64 rng(3);
  const auto m = gen::random_measure(3, 2, rng);
  EXPECT_NEAR(fit_pca({m, m}).objective, 0.0, 1e-12);
}

TEST(FitPca, NoWorseThanEquispacedRegression) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 5; ++k) {
    const std::vector<DiscreteMeasure> ms{gen::random_measure(2, 1, rng), gen::random_measure(2, 1, rng),
                                          gen::random_measure(2, 1, rng)};
    const std::vector<double> eq{0.0, 0.5, 1.0};
    TimedDataset data({{0.0, ms[0]}, {0.5, ms[1]}, {1.0, ms[2]}});
    PcaOptions opts;
    opts.init = eq;
    EXPECT_LE(fit_pca(ms, opts).objective, fit_regression(data).cost + 1e-10);
  }
}

TEST(FitPca, ObjectiveNeverIncreases) {
  std::mt19937_64 rng(5);
  std::vector<DiscreteMeasure> ms;
  for (int i = 0; i < 4; ++i) ms.push_back(gen::random_measure(2, 2, rng));
  const auto st = fit_pca(ms);
  for (std::size_t i = 1; i < st.objective_trace.size(); ++i)
    EXPECT_LE(st.objective_trace[i], st.objective_trace[i - 1] + 1e-12);
  for (std::size_t i = 1; i < st.half_step_trace.size(); ++i)
    EXPECT_LE(st.half_step_trace[i], st.half_step_trace[i - 1] + 1e-12);
}

TEST(FitPca, ObjectiveIsSelfConsistent) {
  std::mt19937_64 rng(6);
  std::vector<DiscreteMeasure> ms;
  for (int i = 0; i < 3; ++i) ms.push_back(gen::random_measure(3, 1, rng));
  const auto st = fit_pca(ms);
  EXPECT_NEAR(pca_objective(st, ms), st.objective, 1e-9);
  std::vector<TimedMeasure> e;
  for (std::size_t i = 0; i < ms.size(); ++i) e.push_back({st.times[i], ms[i]});
  EXPECT_NEAR(regression_objective(st.law.pi, TimedDataset(e)), st.objective, 1e-7);
}

TEST(FitPca, IterationBudget) {
  std::mt19937_64 rng(7);
  std::vector<DiscreteMeasure> ms;
  for (int i = 0; i < 4; ++i) ms.push_back(gen::random_measure(3, 2, rng));
  PcaOptions opts;
  opts.max_iterations = 1;
  opts.tolerance = 0.0;
  const auto st = fit_pca(ms, opts);
  EXPECT_EQ(st.iteration, 1u);
  EXPECT_FALSE(st.converged);
}

TEST(FitPca, Errors) {
  EXPECT_THROW(fit_pca({dirac1(0)}), EmptyMeasureError);
  PcaOptions opts;
  opts.init = std::vector<double>{0.0};
  EXPECT_THROW(fit_pca({dirac1(0), dirac1(1)}, opts), DimensionError);
}

TEST(InitialTimes, SpanTheUnitInterval) {
  const auto t = initial_times({dirac1(2), dirac1(0), dirac1(1)});
  const double lo = *std::min_element(t.begin(), t.end()), hi = *std::max_element(t.begin(), t.end());
  EXPECT_NEAR(lo, 0.0, 1e-12);
  EXPECT_NEAR(hi, 1.0, 1e-12);
  EXPECT_NEAR(t[2], 0.5, 1e-12);
}
