#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "uspas/builtins.hpp"
#include "uspas/errors.hpp"
#include "uspas/sysmodel.hpp"

using uspas::Vector;

namespace {

uspas::ParameterizedSystem decay() {
  return {1, 0,
          [](double, const Vector& x, const Vector&, Vector& dx) { dx = -x; },
          std::nullopt, "decay"};
}

uspas::IntegrateOptions tight() {
  uspas::IntegrateOptions o;
  o.method = uspas::Rk45{1e-10, 1e-12};
  return o;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// x1 error at t = 2 for the unit cascade from (0, 1) with RK4 step h
double rk4_error(double h) {
  auto sys = uspas::compose_cascade(uspas::builtin::linear_cascade());
  uspas::IntegrateOptions o;
  o.method = uspas::Rk4{h};
  auto tr = uspas::integrate(sys, 0.0, vec({0, 1}), vec({1, 1}), 2.0, o);
  return std::abs(tr.final_state()[0] - 2.0 * std::exp(-2.0));
}

}  // namespace

TEST(Integrate, ExponentialDecay) {
  auto tr = uspas::integrate(decay(), 0.0, vec({1}), Vector(), 1.0, tight());
  EXPECT_NEAR(tr.final_state()[0], std::exp(-1.0), 1e-8);
  EXPECT_DOUBLE_EQ(tr.elapsed.back(), 1.0);
}

TEST(Integrate, ZeroFieldIsConstant) {
  uspas::ParameterizedSystem still{2, 0, [](double, const Vector&, const Vector&, Vector& dx) {
                                     dx.setZero();
                                   }};
  auto tr = uspas::integrate(still, 3.0, vec({1.5, -2}), Vector(), 4.0);
  for (const auto& x : tr.states) EXPECT_EQ(x, vec({1.5, -2}));
}

TEST(Integrate, OutputSpacingDefault) {
  auto tr = uspas::integrate(decay(), 0.0, vec({1}), Vector(), 8.0);
  for (std::size_t k = 1; k < tr.size(); ++k)
    EXPECT_LE(tr.elapsed[k] - tr.elapsed[k - 1], 8.0 / 400 + 1e-12);
}

TEST(Integrate, LinearCascadeClosedForm) {
  auto sys = uspas::compose_cascade(uspas::builtin::linear_cascade());
  auto tr = uspas::integrate(sys, 0.0, vec({0, 1}), vec({1, 1}), 5.0, tight());
  EXPECT_NEAR(tr.final_state()[0], 5.0 * std::exp(-5.0), 1e-7);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double t = tr.elapsed[k];
    EXPECT_NEAR(tr.states[k][0], t * std::exp(-t), 1e-7);
    EXPECT_NEAR(tr.states[k][1], std::exp(-t), 1e-7);
  }
}

TEST(Integrate, Rk4FourthOrder) {
  const double ratio = rk4_error(0.1) / rk4_error(0.05);
  EXPECT_GE(ratio, 10.0);
  EXPECT_LE(ratio, 25.0);
}

TEST(Integrate, DivergenceCarriesLastState) {
  uspas::ParameterizedSystem blowup{1, 0, [](double, const Vector& x, const Vector&, Vector& dx) {
                                      dx = x.cwiseProduct(x);
                                    }};
  try {
    uspas::integrate(blowup, 0.0, vec({1}), Vector(), 2.0);
    FAIL() << "expected divergence";
  } catch (const uspas::DivergenceError& e) {
    EXPECT_LT(e.last_time(), 1.0);
    EXPECT_TRUE(std::isfinite(e.last_state()[0]));
  }
  auto tr = uspas::integrate_recorded(blowup, 0.0, vec({1}), Vector(), 2.0);
  ASSERT_FALSE(tr.ok());
}

TEST(Integrate, TimeShiftInvariance) {
  auto sys = uspas::compose_cascade(uspas::builtin::linear_cascade());
  auto a = uspas::integrate(sys, 0.0, vec({0.3, -1}), vec({1, 2}), 3.0);
  auto b = uspas::integrate(sys, 7.25, vec({0.3, -1}), vec({1, 2}), 3.0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k)
    EXPECT_LE((a.states[k] - b.states[k]).norm(), 1e-9);
}

TEST(Integrate, StopWhenEndsEarly) {
  auto o = tight();
  o.stop_when = [](double, const Vector& x) { return std::abs(x[0]) < 0.5; };
  auto tr = uspas::integrate(decay(), 0.0, vec({1}), Vector(), 10.0, o);
  EXPECT_TRUE(tr.stopped);
  EXPECT_LT(tr.elapsed.back(), 1.0);
  EXPECT_LT(std::abs(tr.final_state()[0]), 0.5);
}

TEST(ComposeCascade, DecoupledWhenInterconnectionVanishes) {
  auto c = uspas::builtin::linear_cascade();
  c.g = [](double, const Vector&, const Vector&, uspas::Matrix& g) { g.setZero(); };
  auto sys = uspas::compose_cascade(c);
  auto tr = uspas::integrate(sys, 0.0, vec({1, 1}), vec({1, 3}), 2.0, tight());
  for (std::size_t k = 0; k < tr.size(); ++k) {
    EXPECT_NEAR(tr.states[k][0], std::exp(-tr.elapsed[k]), 1e-9);
    EXPECT_NEAR(tr.states[k][1], std::exp(-3 * tr.elapsed[k]), 1e-10);
  }
}

TEST(ComposeCascade, DrivenStateIgnoresDriver) {
  auto sys = uspas::compose_cascade(uspas::builtin::linear_cascade());
  const Vector theta = vec({1, 2});
  Vector base = sys(0.4, vec({0.2, 0.7}), theta);
  Vector moved = sys(0.4, vec({5.0, 0.7}), theta);
  EXPECT_EQ(base[1], moved[1]);
  EXPECT_NE(base[0], moved[0]);
}

TEST(ComposeCascade, ZeroDriverGivesFreeSubsystem) {
  auto sys = uspas::compose_cascade(uspas::builtin::linear_cascade());
  auto tr = uspas::integrate(sys, 0.0, vec({2, 0}), vec({0.5, 1}), 3.0, tight());
  for (std::size_t k = 0; k < tr.size(); ++k) {
    EXPECT_NEAR(tr.states[k][0], 2 * std::exp(-0.5 * tr.elapsed[k]), 1e-9);
    EXPECT_EQ(tr.states[k][1], 0.0);
  }
}

TEST(ComposeCascade, RejectsWrongDimension) {
  auto sys = uspas::compose_cascade(uspas::builtin::linear_cascade());
  EXPECT_THROW(sys(0.0, vec({1, 2, 3}), vec({1, 1})), uspas::DimensionError);
}

TEST(Ensemble, SingleSampleMatchesIntegrate) {
  auto sampler = uspas::InitialConditionSampler::from_list({{0.5, vec({0.7})}});
  auto trs = uspas::ensemble(decay(), sampler, Vector(), 2.0);
  auto one = uspas::integrate(decay(), 0.5, vec({0.7}), Vector(), 2.0);
  ASSERT_EQ(trs.size(), 1u);
  EXPECT_EQ(trs[0].states.back(), one.states.back());
}

TEST(Ensemble, SeededSamplersRepeat) {
  auto a = uspas::InitialConditionSampler::uniform_ball(3, 2.0, 50, {0, 1}, 9);
  auto b = uspas::InitialConditionSampler::uniform_ball(3, 2.0, 50, {0, 1}, 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.samples()[i].x0, b.samples()[i].x0);
    EXPECT_EQ(a.samples()[i].t0, b.samples()[i].t0);
    EXPECT_LE(a.samples()[i].x0.norm(), 2.0);
  }
  auto s = uspas::InitialConditionSampler::sphere(5, 1.5, 40, {0}, 3);
  for (const auto& ic : s.samples()) EXPECT_NEAR(ic.x0.norm(), 1.5, 1e-12);
}

TEST(Ensemble, ThreadCountDoesNotChangeResults) {
  auto sys = uspas::compose_cascade(uspas::builtin::linear_cascade());
  auto sampler = uspas::InitialConditionSampler::uniform_ball(2, 1.0, 16, {0, 2}, 4);
  auto one = uspas::ensemble(sys, sampler, vec({1, 1}), 3.0, {}, 1);
  auto four = uspas::ensemble(sys, sampler, vec({1, 1}), 3.0, {}, 4);
  for (std::size_t i = 0; i < one.size(); ++i)
    EXPECT_EQ(uspas::trajectory_csv(one[i]), uspas::trajectory_csv(four[i]));
}

TEST(Ensemble, ShellsProbeDefaultInitialTimes) {
  uspas::ShellPlan plan;
  auto s = uspas::InitialConditionSampler::shells(2, 1.0, 6.0, plan, 1);
  auto t0 = s.probed_t0();
  ASSERT_EQ(t0.size(), 5u);
  EXPECT_DOUBLE_EQ(t0[1], 2.0);
  EXPECT_DOUBLE_EQ(t0.back(), 60.0);
}

TEST(TrajectoryCsv, RoundTripsExactly) {
  auto tr = uspas::integrate(decay(), 0.0, vec({1.0 / 3.0}), Vector(), 1.0);
  std::istringstream in(uspas::trajectory_csv(tr));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x1");
  std::size_t k = 0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    EXPECT_EQ(std::stod(line.substr(0, comma)), tr.times[k]);
    EXPECT_EQ(std::stod(line.substr(comma + 1)), tr.states[k][0]);
    ++k;
  }
  EXPECT_EQ(k, tr.size());
}
