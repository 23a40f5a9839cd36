#include <benchmark/benchmark.h>

#include <random>

#include "wregress/gaussian.hpp"
#include "wregress/regression.hpp"

using namespace wregress;

namespace {

DiscreteMeasure random_measure(Eigen::Index atoms, Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u(0.5, 1.5);
  Matrix p(atoms, d);
  Vector w(atoms);
  for (Eigen::Index i = 0; i < atoms; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) p(i, j) = n01(rng);
    w[i] = u(rng);
  }
  return DiscreteMeasure(p, w / w.sum());
}

TimedDataset random_dataset(std::size_t n, Eigen::Index atoms, std::mt19937_64& rng) {
  std::vector<TimedMeasure> e;
  for (std::size_t i = 0; i < n; ++i)
    e.push_back({static_cast<double>(i) / static_cast<double>(n - 1), random_measure(atoms, 2, rng)});
  return TimedDataset(std::move(e));
}

GaussianDataset random_gaussian_dataset(std::size_t n, Eigen::Index d, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  std::vector<GaussianTimedMeasure> e;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix a(d, d);
    for (Eigen::Index r = 0; r < d; ++r)
      for (Eigen::Index c = 0; c < d; ++c) a(r, c) = n01(rng);
    e.push_back({static_cast<double>(i) / static_cast<double>(n - 1),
                 GaussianMeasure(Vector::Zero(d), a * a.transpose() / static_cast<double>(d) + 0.1 * Matrix::Identity(d, d))});
  }
  return GaussianDataset(std::move(e));
}

}  // namespace

static void BM_W2Discrete(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto a = random_measure(state.range(0), 3, rng), b = random_measure(state.range(0), 3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(w2_discrete(a, b).cost);
}
BENCHMARK(BM_W2Discrete)->Arg(10)->Arg(50)->Arg(200);

static void BM_FitExact(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto data = random_dataset(static_cast<std::size_t>(state.range(0)), state.range(1), rng);
  for (auto _ : state) benchmark::DoNotOptimize(fit_regression(data).cost);
}
BENCHMARK(BM_FitExact)->Args({3, 4})->Args({4, 4})->Args({4, 6})->Unit(benchmark::kMillisecond);

static void BM_FitEntropic(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto data = random_dataset(static_cast<std::size_t>(state.range(0)), state.range(1), rng);
  const auto solver = SolverConfig::entropic_with(0.01);
  for (auto _ : state) benchmark::DoNotOptimize(fit_regression(data, solver).cost);
}
BENCHMARK(BM_FitEntropic)->Args({3, 4})->Args({4, 4})->Args({4, 6})->Unit(benchmark::kMillisecond);

static void BM_SolveSdp(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto problem = build_sdp(random_gaussian_dataset(static_cast<std::size_t>(state.range(1)), state.range(0), rng));
  SdpOptions opts;
  opts.warm_start = state.range(2) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(solve_sdp(problem, opts).f_value);
}
BENCHMARK(BM_SolveSdp)
    ->ArgNames({"d", "N", "warm"})
    ->Args({1, 10, 1})
    ->Args({1, 10, 0})
    ->Args({3, 10, 1})
    ->Args({5, 30, 1})
    ->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
