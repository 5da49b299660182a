#include <benchmark/benchmark.h>

#include "uspas/builtins.hpp"
#include "uspas/sysmodel.hpp"

using uspas::Vector;

static void BM_Rk45LinearCascade(benchmark::State& state) {
  auto sys = uspas::compose_cascade(uspas::builtin::linear_cascade());
  Vector x0(2), theta(2);
  x0 << 0.0, 1.0;
  theta << 1.0, 1.0;
  uspas::IntegrateOptions o;
  o.method = uspas::Rk45{1e-10, 1e-12};
  for (auto _ : state) benchmark::DoNotOptimize(uspas::integrate(sys, 0.0, x0, theta, 20.0, o));
}
BENCHMARK(BM_Rk45LinearCascade);

static void BM_Rk4LinearCascade(benchmark::State& state) {
  auto sys = uspas::compose_cascade(uspas::builtin::linear_cascade());
  Vector x0(2), theta(2);
  x0 << 0.0, 1.0;
  theta << 1.0, 1.0;
  uspas::IntegrateOptions o;
  o.method = uspas::Rk4{1e-3};
  for (auto _ : state) benchmark::DoNotOptimize(uspas::integrate(sys, 0.0, x0, theta, 20.0, o));
}
BENCHMARK(BM_Rk4LinearCascade);

static void BM_EnsembleCheck(benchmark::State& state) {
  auto sys = uspas::builtin::forced_decay(2);
  Vector theta(2);
  theta << 4.0, 1.0;
  auto sampler = uspas::InitialConditionSampler::uniform_ball(
      2, 1.0, static_cast<std::size_t>(state.range(0)), {0.0, 5.0}, 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(uspas::ensemble(sys, sampler, theta, 10.0, {}, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EnsembleCheck)->Arg(16)->Arg(128);
