#include <cmath>

#include <gtest/gtest.h>

#include "uspas/builtins.hpp"
#include "uspas/certcheck.hpp"
#include "uspas/errors.hpp"

using uspas::BallPair;
using uspas::InitialConditionSampler;
using uspas::Vector;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// x' = -theta0 x + c
uspas::ParameterizedSystem offset_decay(double c) {
  return {1, 1,
          [c](double, const Vector& x, const Vector& th, Vector& dx) {
            dx = -th[0] * x;
            dx.array() += c;
          },
          std::nullopt, "offset_decay"};
}

InitialConditionSampler shells(int dim, double radius, double horizon) {
  uspas::ShellPlan plan;
  plan.directions = 6;
  plan.radii = 5;
  return InitialConditionSampler::shells(dim, radius, horizon, plan, 11);
}

}  // namespace

TEST(SetDistance, ClosedForm) {
  EXPECT_DOUBLE_EQ(uspas::set_distance(vec({0, 3}), 1.0), 2.0);
  EXPECT_EQ(uspas::set_distance(vec({0.3, 0.4}), 1.0), 0.0);
  EXPECT_DOUBLE_EQ(uspas::set_distance(vec({3, 4}), 0.0), 5.0);
}

TEST(CheckUS, StableDecayHolds) {
  auto sys = uspas::builtin::linear(2);
  BallPair balls{0.1, 1.0};
  auto v = uspas::check_US(sys, vec({-1}), balls, shells(2, 1.0, 10.0), 10.0);
  EXPECT_TRUE(v.holds) << v.note;
  ASSERT_TRUE(v.eta);
  // sup |x|_delta = |x0| - delta, so eta sits below the identity
  for (double s : {0.2, 0.5, 1.0}) EXPECT_LE((*v.eta)(s), s);
  for (const auto& p : v.us_data) EXPECT_GE((*v.eta)(p.s), p.value);
}

TEST(CheckUS, UnstableFailsWithCounterexample) {
  auto v = uspas::check_US(uspas::builtin::linear(2), vec({1}), {0.1, 1.0}, shells(2, 1.0, 30.0),
                           30.0);
  EXPECT_FALSE(v.holds);
  EXPECT_TRUE(v.counterexample.has_value());
}

TEST(CheckUS, FrozenSystemHolds) {
  auto v = uspas::check_US(uspas::builtin::linear(1), vec({0}), {0.1, 1.0}, shells(1, 1.0, 5.0),
                           5.0);
  EXPECT_TRUE(v.holds) << v.note;
}

TEST(CheckUA, DecayReachesBall) {
  auto v = uspas::check_UA(uspas::builtin::linear(2), vec({-1}), {0.1, 1.0},
                           shells(2, 1.0, 15.0), 15.0);
  EXPECT_TRUE(v.holds) << v.note;
}

TEST(CheckUA, FrozenSystemFails) {
  auto sampler = InitialConditionSampler::from_list({{0.0, vec({0.8})}});
  auto v = uspas::check_UA(uspas::builtin::linear(1), vec({0}), {0.1, 1.0}, sampler, 5.0);
  EXPECT_FALSE(v.holds);
}

TEST(CheckUA, PracticalEquilibriumInsideBall) {
  auto v = uspas::check_UA(offset_decay(0.05), vec({1}), {0.1, 1.0}, shells(1, 1.0, 15.0), 15.0);
  EXPECT_TRUE(v.holds) << v.note;
}

TEST(CheckUAS, WitnessDominatesEverySample) {
  auto v = uspas::check_UAS(offset_decay(0.05), vec({1}), {0.1, 1.0}, shells(1, 1.0, 15.0),
                            15.0);
  ASSERT_TRUE(v.holds) << v.note;
  ASSERT_TRUE(v.beta);
  EXPECT_EQ(v.violations, 0u);
  EXPECT_LE(v.worst_margin, 0.0);
}

TEST(CheckUAS, GlobalSentinel) {
  auto sampler = InitialConditionSampler::uniform_ball(2, 5.0, 30, {0, 4}, 2);
  auto v = uspas::check_UAS(uspas::builtin::linear(2), vec({-1}), {0.0, uspas::kInfinity},
                            sampler, 20.0);
  EXPECT_TRUE(v.holds) << v.note;
}

TEST(CheckUAS, SubPairsHoldOnStoredTrajectories) {
  auto sys = offset_decay(0.05);
  auto sampler = shells(1, 1.0, 15.0);
  auto trajectories = uspas::ensemble(sys, sampler, vec({1}), 15.0);
  BallPair outer{0.1, 1.0};
  auto base = uspas::evaluate_UAS(trajectories, outer, 15.0, 1e-3);
  ASSERT_TRUE(base.holds) << base.note;
  for (const BallPair& inner : {BallPair{0.2, 1.0}, BallPair{0.1, 0.5}, BallPair{0.3, 0.6}}) {
    auto v = uspas::evaluate_UAS(trajectories, inner, 15.0, 1e-3);
    EXPECT_TRUE(v.holds) << inner.delta << " " << inner.Delta << ": " << v.note;
  }
}

TEST(CheckUB, DecayHasNoOffset) {
  auto v = uspas::check_UB(uspas::builtin::linear(1), vec({-1}), 2.0, shells(1, 2.0, 10.0), 10.0);
  EXPECT_TRUE(v.holds);
  ASSERT_TRUE(v.mu);
  EXPECT_LT(*v.mu, 0.05);
}

TEST(CheckUB, ConstantInputGivesUnitOffset) {
  auto sampler = InitialConditionSampler::from_list({{0.0, vec({0.0})}});
  auto v = uspas::check_UB(offset_decay(1.0), vec({1}), 1.0, sampler, 20.0);
  EXPECT_TRUE(v.holds);
  ASSERT_TRUE(v.mu);
  EXPECT_NEAR(*v.mu, 1.0, 1e-6);
}

TEST(CheckUB, EscapeFails) {
  auto v = uspas::check_UB(uspas::builtin::linear(1), vec({3}), 1.0, shells(1, 1.0, 20.0), 20.0);
  EXPECT_FALSE(v.holds);
}

TEST(Dset, OnlyDecayingParameterPasses) {
  auto sys = offset_decay(0.0);
  std::vector<Vector> grid{vec({-1}), vec({0}), vec({1})};
  auto est = uspas::estimate_dset(sys, {0.01, 1.0}, grid, shells(1, 1.0, 15.0), 15.0);
  ASSERT_EQ(est.entries.size(), 3u);
  ASSERT_EQ(est.passing.size(), 1u);
  EXPECT_EQ(est.passing[0][0], 1.0);
}

TEST(Dset, AllFailingGivesEmptyEstimate) {
  auto est = uspas::estimate_dset(offset_decay(0.0), {0.01, 1.0}, {vec({-1}), vec({0})},
                                  shells(1, 1.0, 10.0), 10.0);
  EXPECT_TRUE(est.passing.empty());
}

TEST(Uspas, OracleShrinksEquilibrium) {
  auto sys = offset_decay(0.1);
  std::vector<BallPair> schedule{{0.5, 1.0}, {0.1, 10.0}};
  auto oracle = [](const BallPair& b) { return vec({1.0 / b.delta}); };
  auto factory = [](const BallPair& b) { return shells(1, b.Delta, 20.0); };
  auto v = uspas::check_USPAS(sys, oracle, schedule, factory, 20.0);
  EXPECT_TRUE(v.holds) << v.note;
  ASSERT_EQ(v.schedule.size(), 2u);
  EXPECT_DOUBLE_EQ(v.schedule[1].theta[0], 10.0);
}

TEST(Uspas, FixedParameterFails) {
  auto sys = offset_decay(0.5);
  std::vector<BallPair> schedule{{0.6, 1.0}, {0.1, 1.0}};
  auto oracle = [](const BallPair&) { return vec({1.0}); };
  auto factory = [](const BallPair& b) { return shells(1, b.Delta, 20.0); };
  auto v = uspas::check_USPAS(sys, oracle, schedule, factory, 20.0);
  EXPECT_FALSE(v.holds);
  EXPECT_TRUE(v.schedule[0].holds);
  EXPECT_FALSE(v.schedule[1].holds);
}

TEST(Uspas, OracleOutsideParameterSetThrows) {
  auto oracle = [](const BallPair&) { return vec({-1.0}); };
  auto factory = [](const BallPair& b) { return shells(1, b.Delta, 5.0); };
  auto positive = [](const Vector& th) { return th[0] > 0; };
  EXPECT_THROW(uspas::check_USPAS(offset_decay(0.0), oracle, {{0.1, 1.0}}, factory, 5.0, {},
                                  positive),
               uspas::ParameterSetError);
}

TEST(Uspas, DecoupledCascadePasses) {
  auto c = uspas::builtin::linear_cascade();
  c.g = [](double, const Vector&, const Vector&, uspas::Matrix& g) { g.setZero(); };
  auto sys = uspas::compose_cascade(c);
  auto oracle = [](const BallPair&) { return vec({1.0, 2.0}); };
  auto factory = [](const BallPair& b) { return shells(2, b.Delta, 20.0); };
  auto v = uspas::check_USPAS(sys, oracle, {{0.1, 1.0}, {0.05, 3.0}}, factory, 20.0);
  EXPECT_TRUE(v.holds) << v.note;
}

TEST(CheckUAS, SameSeedSameVerdict) {
  auto a = uspas::check_UAS(offset_decay(0.05), vec({1}), {0.1, 1.0}, shells(1, 1.0, 15.0), 15.0);
  auto b = uspas::check_UAS(offset_decay(0.05), vec({1}), {0.1, 1.0}, shells(1, 1.0, 15.0), 15.0);
  ASSERT_EQ(a.us_data.size(), b.us_data.size());
  for (std::size_t i = 0; i < a.us_data.size(); ++i) {
    EXPECT_EQ(a.us_data[i].s, b.us_data[i].s);
    EXPECT_EQ(a.us_data[i].value, b.us_data[i].value);
  }
  EXPECT_EQ(a.worst_margin, b.worst_margin);
}

TEST(BallPair, RejectsInvertedRadii) {
  EXPECT_THROW((BallPair{2.0, 1.0}).validate(), uspas::PreconditionError);
}
