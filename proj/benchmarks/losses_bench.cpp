#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "stsreg/losses.hpp"

namespace {

std::vector<double> residuals(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs(n);
  for (auto& x : xs) x = u(rng);
  return xs;
}

using PiecewiseLoss = stsreg::LossValue (*)(double, const stsreg::LossSpec&);

void BM_PiecewiseLoss(benchmark::State& state, PiecewiseLoss fn, stsreg::LossSpec spec) {
  const auto xs = residuals(4096);
  for (auto _ : state) {
    double acc = 0.0;
    for (double x : xs) acc += fn(x, spec).value;
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(xs.size()));
}

void BM_InfoNce(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 64;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<stsreg::Vector> a(n, stsreg::Vector(dim));
  std::vector<stsreg::Vector> p(n, stsreg::Vector(dim));
  for (auto& v : a) for (auto& x : v) x = g(rng);
  for (auto& v : p) for (auto& x : v) x = g(rng);
  for (auto _ : state) {
    auto r = stsreg::info_nce(a, p, 0.05);
    benchmark::DoNotOptimize(r.value);
  }
  state.SetComplexityN(state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_PiecewiseLoss, translated_relu, stsreg::translated_relu,
                  stsreg::LossSpec::translated_relu(2.5, 0.25));
BENCHMARK_CAPTURE(BM_PiecewiseLoss, smooth_k2, stsreg::smooth_k2, stsreg::LossSpec::smooth_k2(2.0, 0.25));
BENCHMARK(BM_InfoNce)->RangeMultiplier(2)->Range(8, 128)->Complexity(benchmark::oNSquared);

BENCHMARK_MAIN();
