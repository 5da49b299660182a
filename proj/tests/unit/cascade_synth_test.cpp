#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "uspas/builtins.hpp"
#include "uspas/cascade_synth.hpp"
#include "uspas/errors.hpp"

using uspas::BallPair;
using uspas::ComparisonFunction;
using uspas::KLBound;
using uspas::LyapunovCertificate;
using uspas::Vector;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

LyapunovCertificate quadratic_rate_cert(double lo, double hi, double rate, BallPair annulus) {
  LyapunovCertificate c;
  c.V = [](double, const Vector& x) { return 0.5 * x.squaredNorm(); };
  c.alpha_lo = ComparisonFunction::power(lo, 2.0);
  c.alpha_hi = ComparisonFunction::power(hi, 2.0);
  c.decay = uspas::RateDecay{ComparisonFunction::power(rate, 2.0)};
  c.c = ComparisonFunction::identity();
  c.annulus = annulus;
  return c;
}

uspas::ParameterizedSystem decay(double sign = -1.0) {
  return {1, 0,
          [sign](double, const Vector& x, const Vector&, Vector& dx) { dx = sign * x; },
          std::nullopt, "linear"};
}

uspas::SynthesizedEstimate linear_estimate(double d1, double D1, double d2, double D2) {
  auto k = uspas::builtin::linear_cascade_certificates(1.0, 1.0, {d1, D1}, {d2, D2});
  return uspas::synthesize_cascade_bound(k.cert1, k.sub2, k.G, k.gamma);
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

}  // namespace

TEST(Transform, PreservesSandwichRatio) {
  auto cert = quadratic_rate_cert(0.4, 0.6, 1.0, {0.05, 3.0});
  auto out = uspas::transform_lyapunov(cert, 1.0);
  ASSERT_TRUE(out.exponential());
  EXPECT_DOUBLE_EQ(out.k(), 1.0);
  auto before = uspas::compose(cert.alpha_lo.inverse(), cert.alpha_hi);
  auto after = uspas::compose(out.alpha_lo.inverse(), out.alpha_hi);
  for (double s : linspace(0.06, 2.9, 10)) EXPECT_NEAR(after(s), before(s), 1e-8) << s;
}

TEST(Transform, DecaysExponentiallyAlongTrajectories) {
  // x' = -x with V = x^2/2 gives V' = -x^2
  auto cert = quadratic_rate_cert(0.5, 0.5, 1.0, {0.05, 2.0});
  auto out = uspas::transform_lyapunov(cert, 1.0);
  const double h = 1e-5;
  for (double x0 : {1.9, 1.0, 0.3}) {
    for (double t = 0.0; x0 * std::exp(-t) > 0.06; t += 0.25) {
      const double x = x0 * std::exp(-t);
      const double vdot = (out.V(0, vec({x * std::exp(-h)})) - out.V(0, vec({x * std::exp(h)}))) /
                          (2 * h);
      const double v = out.V(0, vec({x}));
      EXPECT_LE(vdot, -out.k() * v * (1 - 1e-5)) << x;
    }
  }
}

TEST(Transform, RejectsZeroInnerRadius) {
  auto cert = quadratic_rate_cert(0.5, 0.5, 1.0, {0.0, 2.0});
  EXPECT_THROW(uspas::transform_lyapunov(cert), uspas::PreconditionError);
}

TEST(ComparisonBound, IdentityBoundsNoInput) {
  auto id = ComparisonFunction::identity();
  EXPECT_DOUBLE_EQ(uspas::lemma2_bound(id, id, 1.0, 0.0, 0.0, 1.0, 0.0), 1.0);
}

TEST(ComparisonBound, ResidualTermInTheLimit) {
  auto lo = ComparisonFunction::power(1.0, 2.0);
  auto hi = ComparisonFunction::power(3.0, 2.0);
  const double b = uspas::lemma2_bound(lo, hi, 1.0, 0.0, 0.2, 5.0, 800.0);
  EXPECT_NEAR(b, std::sqrt(3.0) * 0.2, 1e-12);
}

TEST(ComparisonBound, QuadraticBoundsWithInput) {
  auto sq = ComparisonFunction::power(1.0, 2.0);
  const double b = uspas::lemma2_bound(sq, sq, 2.0, 2.0, 0.5, 2.0, 1.0);
  EXPECT_NEAR(b, std::sqrt(0.25 + 1.0) + std::sqrt(4 * std::exp(-2.0) + 1.0), 1e-12);
}

TEST(ComparisonBound, MonotoneInTimeAndRadius) {
  auto id = ComparisonFunction::identity();
  for (double x0 : {0.5, 1.0, 2.0}) {
    double prev = uspas::kInfinity;
    for (double t : linspace(0, 5, 11)) {
      const double b = uspas::lemma2_bound(id, id, 1.0, 0.0, 0.0, x0, t);
      EXPECT_NEAR(b, x0 * std::exp(-t), 1e-14);
      EXPECT_LT(b, prev);
      prev = b;
    }
  }
  EXPECT_LT(uspas::lemma2_bound(id, id, 1.0, 0.0, 0.0, 1.0, 0.5),
            uspas::lemma2_bound(id, id, 1.0, 0.0, 0.0, 1.1, 0.5));
}

TEST(PropBound, EqualBoundsReturnRadius) {
  auto a = ComparisonFunction::power(2.0, 3.0);
  EXPECT_NEAR(uspas::prop_bound(a, a, 0.5, 1.7), 1.7, 1e-12);
}

TEST(PropBound, HandDerivedRadius) {
  auto lo = ComparisonFunction::power(1.0, 2.0);
  auto hi = ComparisonFunction::power(2.0, 2.0);
  EXPECT_NEAR(uspas::prop_bound(lo, hi, 0.5, 1.0), 1.0 / std::sqrt(2.0), 1e-10);
  EXPECT_THROW(uspas::prop_bound(lo, hi, 0.8, 1.0), uspas::PreconditionError);
}

TEST(Falsifier, FindsGrowthOfUnstableSystem) {
  auto V = [](double, const Vector& x) { return x.squaredNorm(); };
  auto rep = uspas::falsify_nonincrease(decay(1.0), Vector(), V, {}, 0.5, 2.0);
  EXPECT_GT(rep.violations, 0u);
  ASSERT_TRUE(rep.first);
  EXPECT_GT(rep.first->vdot, 0.0);
  EXPECT_LT(rep.seconds, 1.0);
  auto ok = uspas::falsify_nonincrease(decay(-1.0), Vector(), V, {}, 0.5, 2.0);
  EXPECT_EQ(ok.violations, 0u);
}

TEST(LyapunovUspas, BundledFamilyPasses) {
  auto sys = uspas::builtin::forced_decay(1);
  uspas::LyapunovUspasOptions opt;
  opt.samples_per_pair = 100;
  auto rep = uspas::check_lyapunov_uspas(sys, uspas::builtin::forced_decay_family(),
                                         {0.5, 0.1, 0.01, 1e-4}, {1.0, 10.0, 100.0, 1e4}, opt);
  EXPECT_TRUE(rep.holds);
  for (const auto& r : rep.sandwich) EXPECT_TRUE(r.holds) << r.name;
  for (const auto& r : rep.decrease) EXPECT_TRUE(r.holds) << r.name;
  EXPECT_TRUE(rep.condadd.holds);
  EXPECT_LT(rep.condadd.values.back(), 1e-3);
  EXPECT_TRUE(rep.condadd2.holds);
  EXPECT_GT(rep.condadd2.values.back(), 1e3);
}

TEST(LyapunovUspas, FixedBoundsGiveIdentityLimit) {
  auto sys = uspas::builtin::forced_decay(1);
  uspas::LyapunovUspasOptions opt;
  opt.samples_per_pair = 50;
  auto rep = uspas::check_lyapunov_uspas(sys, uspas::builtin::forced_decay_family(),
                                         {0.5, 0.05, 5e-4}, {2.0, 20.0, 2000.0}, opt);
  ASSERT_EQ(rep.condadd.values.size(), 3u);
  EXPECT_NEAR(rep.condadd.values[0], 0.5, 1e-12);
  EXPECT_NEAR(rep.condadd.values[2], 5e-4, 1e-12);
}

TEST(LyapunovUspas, BoundedUpperFunctionFailsOuterLimit) {
  auto sys = uspas::builtin::forced_decay(1);
  uspas::LyapunovUspasOptions opt;
  opt.samples_per_pair = 50;
  auto rep = uspas::check_lyapunov_uspas(sys, uspas::builtin::forced_decay_bounded_family(),
                                         {0.5, 0.1, 0.01}, {0.6, 10.0, 1e4}, opt);
  EXPECT_FALSE(rep.condadd2.holds);
  EXPECT_FALSE(rep.holds);
}

TEST(Synthesis, ZeroDriverResidualRadii) {
  LyapunovCertificate c;
  c.V = [](double, const Vector& x) { return x.squaredNorm(); };
  c.alpha_lo = ComparisonFunction::power(1.0, 2.0);
  c.alpha_hi = ComparisonFunction::power(1.0, 2.0);
  c.decay = uspas::ExponentialDecay{1.5};
  c.c = ComparisonFunction::linear(7.0);
  c.annulus = {0.02, 5.0};
  uspas::Subsystem2Bound sub2{KLBound::product(ComparisonFunction::identity(), 1.0), {0.0, 5.0}};
  auto gamma = uspas::gamma_from_prop_bound(ComparisonFunction::identity(),
                                            ComparisonFunction::identity(), 0.0);
  auto est = uspas::synthesis_radii(c, sub2, ComparisonFunction::constant(3.0), gamma);
  EXPECT_NEAR(est.delta3, 0.04, 1e-12);
  EXPECT_NEAR(est.delta4, 0.06, 1e-12);
  EXPECT_NEAR(est.delta, 0.06, 1e-12);
  ASSERT_TRUE(est.c3);
  EXPECT_EQ((*est.c3)(0.0), 0.0);
}

TEST(Synthesis, LinearCascadeHandComputed) {
  const double d1 = 0.05, D1 = 4.0, d2 = 0.01, D2 = 4.0;
  auto est = linear_estimate(d1, D1, d2, D2);
  // k1 = 2, c1(D1) G = D1, alpha = s^2/2 so alpha^-1(y) = sqrt(2y)
  const double Delta = D1 / std::sqrt(2.0);
  const double delta3 = d1 + std::sqrt(d1 * d1 + D1 * d2) + std::sqrt(D1 * d2);
  const double delta4 = d1 + 2 * std::sqrt(d1 * d1 + 2 * D1 * d2);
  EXPECT_NEAR(est.Delta, Delta, 1e-12);
  EXPECT_NEAR(est.delta3, delta3, 1e-10);
  EXPECT_NEAR(est.delta4, delta4, 1e-10);
  EXPECT_NEAR(est.delta, std::max({d2, delta3, delta4}), 1e-10);
  EXPECT_NEAR(est.t1, std::log(Delta / d2), 1e-5);
  EXPECT_NEAR(est.t2 - est.t1, 0.5 * std::log(D1 * D1 / (d1 * d1)), 1e-9);

  auto c3 = [&](double s) { return D1 * (s + d2); };
  auto eta = [&](double s) {
    return std::sqrt(d1 * d1 + c3(s)) + std::sqrt(s * s + c3(s)) - std::sqrt(d1 * d1 + c3(0)) -
           std::sqrt(c3(0));
  };
  for (double s : {0.0, 0.3, 1.0, 2.5}) {
    EXPECT_NEAR((*est.c3)(s), c3(s), 1e-12);
    EXPECT_NEAR((*est.eta)(s), eta(s), 1e-9);
  }
  EXPECT_EQ(est.audit.k1, 2.0);
  EXPECT_EQ(est.audit.c1_Delta1, D1);
  EXPECT_EQ(est.audit.G_Delta1, 1.0);
}

TEST(Synthesis, ResidualShrinksWhenInnerRadiiHalve) {
  double prev = linear_estimate(0.05, 4, 0.01, 4).delta;
  for (double f : {0.5, 0.25}) {
    const double d = linear_estimate(0.05 * f, 4, 0.01 * f, 4).delta;
    EXPECT_LT(d, prev);
    prev = d;
  }
}

TEST(Synthesis, RadiiMonotoneOnParameterGrid) {
  const std::vector<double> small{0.005, 0.01, 0.02, 0.04};
  const std::vector<double> big{2.0, 4.0, 8.0, 16.0};
  for (std::size_t i = 0; i + 1 < small.size(); ++i)
    for (double d2 : small) {
      EXPECT_LE(linear_estimate(small[i], 4, d2, 4).delta,
                linear_estimate(small[i + 1], 4, d2, 4).delta);
      EXPECT_LE(linear_estimate(d2, 4, small[i], 4).delta,
                linear_estimate(d2, 4, small[i + 1], 4).delta);
    }
  for (std::size_t i = 0; i + 1 < big.size(); ++i)
    for (double D : big) {
      EXPECT_LE(linear_estimate(0.01, big[i], 0.001, D).Delta,
                linear_estimate(0.01, big[i + 1], 0.001, D).Delta);
      EXPECT_LE(linear_estimate(0.01, D, 0.001, big[i]).Delta,
                linear_estimate(0.01, D, 0.001, big[i + 1]).Delta);
    }
}

TEST(Synthesis, BetaDominatesSubsystemBoundAndIsKL) {
  auto est = linear_estimate(0.05, 4, 0.01, 4);
  auto beta2 = KLBound::product(ComparisonFunction::identity(), 1.0);
  auto s = linspace(0, 3, 50), t = linspace(0, 40, 50);
  for (double si : s)
    for (double ti : t) EXPECT_GE((*est.beta)(si, ti), beta2(si, ti));
  auto rep = uspas::check_kl_invariants(*est.beta, s, t);
  EXPECT_TRUE(rep.increasing_in_s);
  EXPECT_TRUE(rep.decreasing_in_t);
}

TEST(Synthesis, DegenerateEstimateRejected) {
  EXPECT_THROW(linear_estimate(1.0, 4, 0.5, 4), uspas::EstimateDegenerateError);
}

TEST(Synthesis, OuterThresholdMustBeBelowDelta1) {
  auto k = uspas::builtin::linear_cascade_certificates(1, 1, {0.0, 2.0}, {0.0, 2.0});
  k.gamma.Delta0 = 3.0;
  EXPECT_THROW(uspas::usas_variant_check(k.cert1, k.sub2, k.G, k.gamma),
               uspas::PreconditionError);
}

TEST(Validate, LinearCascadeHasNoViolations) {
  auto est = linear_estimate(0.05, 4, 0.01, 4);
  auto cascade = uspas::builtin::linear_cascade();
  auto sampler =
      uspas::InitialConditionSampler::uniform_ball(2, est.Delta, 200, {0.0, 5.0}, 21);
  auto v = uspas::validate_estimate(cascade, vec({1, 1}), est, sampler, 20.0);
  EXPECT_TRUE(v.holds) << v.note;
  EXPECT_EQ(v.violations, 0u);
}

TEST(Validate, HalvedBoundIsCaught) {
  // 1.2 s e^{-t/2} dominates the unit cascade; half of it is exceeded at t = 0.
  auto sys = uspas::compose_cascade(uspas::builtin::linear_cascade());
  auto sampler = uspas::InitialConditionSampler::uniform_ball(2, 3.0, 100, {0.0}, 21);
  auto bound = KLBound::product(ComparisonFunction::linear(1.2), 0.5);
  auto ok = uspas::validate_bound(sys, vec({1, 1}), 0.0, 3.0, bound, sampler, 15.0);
  EXPECT_TRUE(ok.holds) << ok.note;
  auto half = KLBound::product(ComparisonFunction::linear(0.6), 0.5);
  auto bad = uspas::validate_bound(sys, vec({1, 1}), 0.0, 3.0, half, sampler, 15.0);
  EXPECT_FALSE(bad.holds);
  EXPECT_GT(bad.violations, 0u);
}

TEST(Validate, DecoupledUsasVariantHolds) {
  auto k = uspas::builtin::linear_cascade_certificates(1, 1, {0.0, 3.0}, {0.0, 3.0});
  auto est = uspas::usas_variant_check(k.cert1, k.sub2, ComparisonFunction::constant(0.0),
                                       k.gamma);
  EXPECT_TRUE(est.usas_variant);
  EXPECT_EQ(est.delta, 0.0);
  auto cascade = uspas::builtin::linear_cascade();
  cascade.g = [](double, const Vector&, const Vector&, uspas::Matrix& g) { g.setZero(); };
  auto sampler = uspas::InitialConditionSampler::uniform_ball(2, est.Delta, 100, {0.0}, 5);
  auto v = uspas::validate_estimate(cascade, vec({1, 1}), est, sampler, 15.0);
  EXPECT_TRUE(v.holds) << v.note;
}

TEST(Validate, UsasVariantOnCoupledCascade) {
  auto k = uspas::builtin::linear_cascade_certificates(1, 1, {0.0, 3.0}, {0.0, 3.0});
  auto est = uspas::usas_variant_check(k.cert1, k.sub2, k.G, k.gamma);
  auto sampler = uspas::InitialConditionSampler::uniform_ball(2, est.Delta, 100, {0.0}, 5);
  auto v = uspas::validate_estimate(uspas::builtin::linear_cascade(), vec({1, 1}), est, sampler,
                                    15.0);
  EXPECT_TRUE(v.holds) << v.note;
}
