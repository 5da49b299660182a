#include <benchmark/benchmark.h>

#include <cmath>

#include "uspas/robotlab.hpp"

using uspas::Vector;

namespace {

uspas::RobotSetup setup() {
  uspas::RobotSetup s;
  s.model = uspas::two_link_arm();
  s.gains = uspas::PidGains::from_prime(80.0, 15.0, 20.0, 0.1, 0.025);
  s.q_star = Vector(2);
  s.q_star << M_PI / 4, M_PI / 6;
  return s;
}

}  // namespace

static void BM_RobotCascadeRhs(benchmark::State& state) {
  auto s = setup();
  auto sys = uspas::compose_cascade(uspas::closed_loop_cascade(s));
  const Vector theta = uspas::cascade_theta(s);
  Vector x = Vector::Constant(8, 0.3), dx(8);
  for (auto _ : state) {
    sys.rhs(0.0, x, theta, dx);
    benchmark::DoNotOptimize(dx.data());
  }
}
BENCHMARK(BM_RobotCascadeRhs);

static void BM_RobotLyapunovRate(benchmark::State& state) {
  auto s = setup();
  Vector x = Vector::Constant(6, 0.2), it = Vector::Zero(2);
  for (auto _ : state) benchmark::DoNotOptimize(uspas::robot_lyapunov_rate(s, x, it));
}
BENCHMARK(BM_RobotLyapunovRate);

static void BM_RobotTrajectory(benchmark::State& state) {
  auto s = setup();
  auto sys = uspas::compose_cascade(uspas::closed_loop_cascade(s));
  const Vector theta = uspas::cascade_theta(s);
  Vector x0 = Vector::Constant(8, 0.2);
  uspas::IntegrateOptions o;
  o.method = uspas::Rk45{1e-7, 1e-10};
  for (auto _ : state) benchmark::DoNotOptimize(uspas::integrate(sys, 0.0, x0, theta, 10.0, o));
}
BENCHMARK(BM_RobotTrajectory)->Unit(benchmark::kMillisecond);
