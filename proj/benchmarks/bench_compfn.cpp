#include <benchmark/benchmark.h>

#include <vector>

#include "uspas/compfn.hpp"

using uspas::ComparisonFunction;

static void BM_InvertPower(benchmark::State& state) {
  auto f = ComparisonFunction::power(2.5, 1.7);
  double y = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.invert(y));
    y = y < 100 ? y * 1.01 : 0.1;
  }
}
BENCHMARK(BM_InvertPower);

static void BM_InvertGrid(benchmark::State& state) {
  std::vector<double> s{0.0}, v{0.0};
  for (int i = 1; i <= state.range(0); ++i) {
    s.push_back(i * 0.1);
    v.push_back(i * 0.1 + 0.01 * i * i);
  }
  auto f = ComparisonFunction::grid(uspas::Kind::Kinf, s, v);
  double y = 0.05;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.invert(y));
    y = y < v.back() ? y * 1.01 : 0.05;
  }
}
BENCHMARK(BM_InvertGrid)->Arg(16)->Arg(400)->Arg(10000);

static void BM_InvertCustom(benchmark::State& state) {
  auto f = ComparisonFunction::custom(
      uspas::Kind::Kinf, [](double s) { return s + s * s * s; }, "cubic");
  double y = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(f.invert(y));
    y = y < 1000 ? y * 1.03 : 0.1;
  }
}
BENCHMARK(BM_InvertCustom);

static void BM_ComposedSandwich(benchmark::State& state) {
  auto lo = ComparisonFunction::saturating_exp(1.0, 0.5);
  auto hi = ComparisonFunction::grid(uspas::Kind::Kinf, {0, 1, 2, 4}, {0, 0.3, 0.5, 0.9});
  auto h = uspas::compose(hi.inverse(), lo);
  double s = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(h(s));
    s = s < 1.5 ? s * 1.01 : 0.01;
  }
}
BENCHMARK(BM_ComposedSandwich);
