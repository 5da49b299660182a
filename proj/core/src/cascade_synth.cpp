#include "uspas/cascade_synth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "uspas/errors.hpp"

namespace uspas {
namespace {

struct Inputs {
  double delta1, Delta1, delta2, Delta2, k1, cg;
};

Inputs check_inputs(const LyapunovCertificate& cert1, const Subsystem2Bound& sub2,
                    const ComparisonFunction& G, const GammaSurface& gamma) {
  if (!cert1.exponential())
    throw PreconditionError("cascade synthesis needs an exponential-form certificate for f1");
  if (!cert1.c) throw PreconditionError("certificate for f1 has no gradient bound c");
  Inputs in{};
  in.delta1 = cert1.annulus.delta;
  in.Delta1 = cert1.annulus.Delta;
  in.delta2 = sub2.balls.delta;
  in.Delta2 = sub2.balls.Delta;
  in.k1 = cert1.k();
  if (!std::isfinite(in.Delta1)) throw PreconditionError("Delta1 must be finite");
  if (!(in.Delta1 > std::max(in.delta1, gamma.Delta0))) {
    std::ostringstream msg;
    msg << "need Delta1 > max{delta1, Delta0}: Delta1=" << in.Delta1 << ", delta1=" << in.delta1
        << ", Delta0=" << gamma.Delta0;
    throw PreconditionError(msg.str());
  }
  if (!(in.Delta2 > in.delta2) || in.delta2 < 0.0)
    throw PreconditionError("need Delta2 > delta2 >= 0");
  if (!gamma.fn) throw PreconditionError("gamma surface without a callable");
  in.cg = (*cert1.c)(in.Delta1) * G(in.Delta1);
  return in;
}

void fill_audit(SynthesizedEstimate& est, const Inputs& in, const LyapunovCertificate& cert1,
                const ComparisonFunction& G, const GammaSurface& gamma, double gamma_value) {
  est.audit.delta1 = in.delta1;
  est.audit.Delta1 = in.Delta1;
  est.audit.delta2 = in.delta2;
  est.audit.Delta2 = in.Delta2;
  est.audit.k1 = in.k1;
  est.audit.c1_Delta1 = (*cert1.c)(in.Delta1);
  est.audit.G_Delta1 = G(in.Delta1);
  est.audit.gamma = gamma_value;
  est.audit.Delta0 = gamma.Delta0;
}

}  // namespace

GammaSurface gamma_from_prop_bound(ComparisonFunction alpha_lo, ComparisonFunction alpha_hi,
                                   double Delta0) {
  GammaSurface g;
  g.Delta0 = Delta0;
  g.name = "prop_bound";
  g.fn = [lo = std::move(alpha_lo), hi = std::move(alpha_hi), Delta0](double D1, double) {
    return prop_bound(lo, hi, Delta0, D1);
  };
  return g;
}

SynthesizedEstimate synthesis_radii(const LyapunovCertificate& cert1,
                                    const Subsystem2Bound& sub2, const ComparisonFunction& G,
                                    const GammaSurface& gamma) {
  const Inputs in = check_inputs(cert1, sub2, G, gamma);
  const ComparisonFunction& lo = cert1.alpha_lo;
  const ComparisonFunction& hi = cert1.alpha_hi;

  SynthesizedEstimate est;
  const double gamma_value = gamma(in.Delta1, in.Delta2);
  fill_audit(est, in, cert1, G, gamma, gamma_value);
  est.Delta = std::min({in.Delta1, in.Delta2, gamma_value});

  const KLBound beta2 = sub2.beta2;
  const double cg = in.cg;
  const double delta2 = in.delta2;
  est.c3 = ComparisonFunction::custom(
      Kind::K, [beta2, cg, delta2](double s) { return cg * (beta2(s, 0.0) + delta2); }, "c3");

  const double r = cg * in.delta2 / in.k1;
  est.delta3 = in.delta1 + lo.invert(hi(in.delta1) + r) + lo.invert(r);
  est.delta4 = in.delta1 + 2.0 * lo.invert(hi(in.delta1) + 2.0 * r);
  est.delta = std::max({in.delta2, est.delta3, est.delta4});
  return est;
}

SynthesizedEstimate synthesize_cascade_bound(const LyapunovCertificate& cert1,
                                             const Subsystem2Bound& sub2,
                                             const ComparisonFunction& G,
                                             const GammaSurface& gamma) {
  SynthesizedEstimate est = synthesis_radii(cert1, sub2, G, gamma);
  if (!(est.delta < est.Delta)) {
    std::ostringstream msg;
    msg << "synthesized delta=" << est.delta << " is not below Delta=" << est.Delta
        << "; refine the subsystem certificates";
    throw EstimateDegenerateError(msg.str());
  }
  const double delta1 = est.audit.delta1;
  const double delta2 = est.audit.delta2;
  const double k1 = est.audit.k1;
  if (!(delta1 > 0.0))
    throw PreconditionError("t2 needs delta1 > 0; use usas_variant_check for delta1 = 0");

  const ComparisonFunction lo = cert1.alpha_lo;
  const ComparisonFunction hi = cert1.alpha_hi;
  const ComparisonFunction c3 = *est.c3;
  const double c3_0 = c3(0.0);
  const double offset = lo.invert(hi(delta1) + c3_0 / k1) + lo.invert(c3_0 / k1);
  est.eta = ComparisonFunction::custom(
      Kind::K,
      [=](double s) {
        const double c = c3(s) / k1;
        return std::max(0.0, lo.invert(hi(delta1) + c) + lo.invert(hi(s) + c) - offset);
      },
      "eta");

  // t1 = inf{t : beta2(Delta, t) <= delta2}.
  const KLBound& beta2 = sub2.beta2;
  constexpr double kTmax = 1e4;
  if (beta2(est.Delta, 0.0) <= delta2) {
    est.t1 = 0.0;
  } else {
    if (beta2(est.Delta, kTmax) > delta2) {
      std::ostringstream msg;
      msg << "beta2(Delta, t) stays above delta2=" << delta2 << " on [0, " << kTmax << "]";
      throw RootFindError(msg.str());
    }
    double a = 0.0;
    double b = kTmax;
    while (b - a > 1e-6) {
      const double m = 0.5 * (a + b);
      if (beta2(est.Delta, m) <= delta2) {
        b = m;
      } else {
        a = m;
      }
    }
    est.t1 = b;
  }
  est.t2 = est.t1 + std::log(hi(est.audit.Delta1) / hi(delta1)) / k1;
  est.beta = KLBound::max_of({KLBound::product(*est.eta, 1.0, est.t2), beta2});
  return est;
}

SynthesizedEstimate usas_variant_check(const LyapunovCertificate& cert1,
                                       const Subsystem2Bound& sub2, const ComparisonFunction& G,
                                       const GammaSurface& gamma) {
  if (!cert1.exponential())
    throw PreconditionError("USAS variant needs an exponential-form certificate");
  if (cert1.annulus.delta > 0.0 && sub2.balls.delta > 0.0)
    return synthesize_cascade_bound(cert1, sub2, G, gamma);
  if (cert1.annulus.delta != 0.0 || sub2.balls.delta != 0.0)
    throw PreconditionError("USAS variant needs delta1 = delta2 = 0 or both positive");

  const Inputs in = check_inputs(cert1, sub2, G, gamma);
  SynthesizedEstimate est;
  est.usas_variant = true;
  const double gamma_value = gamma(in.Delta1, in.Delta2);
  fill_audit(est, in, cert1, G, gamma, gamma_value);
  est.Delta = std::min({in.Delta1, in.Delta2, gamma_value});
  est.delta = est.delta3 = est.delta4 = 0.0;
  est.t1 = est.t2 = 0.0;

  const ComparisonFunction lo = cert1.alpha_lo;
  const ComparisonFunction hi = cert1.alpha_hi;
  const KLBound beta2 = sub2.beta2;
  const double k = in.k1;
  const double ck = in.cg / k;
  est.c3 = ComparisonFunction::custom(
      Kind::K, [beta2, cg = in.cg](double s) { return cg * beta2(s, 0.0); }, "c3");
  auto bound = [=](double s, double t) {
    const double forced = ck * (beta2(s, 0.0) * std::exp(-0.5 * k * t) + beta2(s, 0.5 * t));
    return lo.invert(hi(s) * std::exp(-k * t) + forced) + beta2(s, t);
  };
  est.beta = KLBound::custom(bound, "usas_cascade");
  est.eta = ComparisonFunction::custom(
      Kind::K, [bound](double s) { return bound(s, 0.0); }, "eta");
  return est;
}

StabilityVerdict validate_bound(const ParameterizedSystem& sys, const Vector& theta,
                                double delta, double Delta, const KLBound& beta,
                                const InitialConditionSampler& sampler, double horizon,
                                const CheckOptions& options) {
  const auto trajs = ensemble(sys, sampler, theta, horizon, options.integrate, options.threads);
  StabilityVerdict v;
  v.property = Property::UAS;
  v.balls = BallPair{delta, Delta};
  v.seed = options.seed;
  v.beta = beta;
  v.probed_t0 = sampler.probed_t0();
  for (const auto& tr : trajs) {
    const double r = tr.initial_state().norm();
    if (r > Delta * (1.0 + 1e-9)) continue;
    ++v.samples;
    if (!tr.ok()) {
      ++v.failed_integrations;
      ++v.violations;
      v.worst_margin = kInfinity;
      if (!v.counterexample)
        v.counterexample = Counterexample{tr.t0, tr.initial_state(), tr.failure->time, kInfinity,
                                          "integration failed: " + tr.failure->message};
      continue;
    }
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const double d = set_distance(tr.states[k], delta);
      const double margin = d - beta(r, tr.elapsed[k]);
      if (margin > 0.0) {
        ++v.violations;
        if (!v.counterexample || margin > v.counterexample->margin)
          v.counterexample =
              Counterexample{tr.t0, tr.initial_state(), tr.times[k], margin, "bound exceeded"};
      }
      v.worst_margin = std::max(v.worst_margin, margin);
    }
  }
  v.holds = v.violations == 0 && v.samples > 0;
  std::ostringstream msg;
  msg << v.violations << " violating points over " << v.samples << " trajectories";
  v.note = msg.str();
  return v;
}

StabilityVerdict validate_estimate(const CascadeSystem& cascade, const Vector& theta,
                                   const SynthesizedEstimate& estimate,
                                   const InitialConditionSampler& sampler, double horizon,
                                   const CheckOptions& options) {
  if (!estimate.beta) throw PreconditionError("estimate has no KL bound");
  return validate_bound(compose_cascade(cascade), theta, estimate.delta, estimate.Delta,
                        *estimate.beta, sampler, horizon, options);
}

}  // namespace uspas
