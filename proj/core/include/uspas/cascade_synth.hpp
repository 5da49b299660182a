#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "uspas/certcheck.hpp"
#include "uspas/compfn.hpp"
#include "uspas/klbound.hpp"
#include "uspas/sysmodel.hpp"

namespace uspas {

struct Gradient {
  double dt = 0.0;
  Vector dx;
};

using LyapunovFn = std::function<double(double t, const Vector& x)>;
using LyapunovGradientFn = std::function<Gradient(double t, const Vector& x)>;

/// dV/dt <= -alpha(|x|).
struct RateDecay {
  ComparisonFunction alpha;
};
/// dV/dt <= -k V.
struct ExponentialDecay {
  double k;
};

/// V with sandwich bounds, decrease condition and gradient bound, valid on
/// the annulus H(delta, Delta) for parameter theta.
struct LyapunovCertificate {
  LyapunovFn V;
  /// Analytic gradient; empty selects central differences.
  LyapunovGradientFn grad;
  ComparisonFunction alpha_lo = ComparisonFunction::identity();
  ComparisonFunction alpha_hi = ComparisonFunction::identity();
  std::variant<RateDecay, ExponentialDecay> decay = ExponentialDecay{1.0};
  /// |dV/dx (t, x)| <= c(|x|); nondecreasing, c(0) >= 0.
  std::optional<ComparisonFunction> c;
  BallPair annulus{0.0, kInfinity};
  Vector theta;

  bool exponential() const { return std::holds_alternative<ExponentialDecay>(decay); }
  /// Rate of the exponential form; throws KindError for rate form.
  double k() const;
  Gradient gradient(double t, const Vector& x) const;
  /// dV/dt along x' = f(t, x, theta).
  double derivative(const ParameterizedSystem& sys, double t, const Vector& x) const;
  /// Throws PreconditionError when alpha_lo > alpha_hi on sampled radii.
  void validate() const;
};

/// Central differences with step 1e-6 (1 + |coordinate|).
Gradient finite_difference_gradient(const LyapunovFn& V, double t, const Vector& x);

// -- rate-to-exponential transform -------------------------------------------

/// rho(s) = exp(k * integral_1^s dq / a(q)) with a(q) = alpha(alpha_hi^{-1}(q)),
/// tabulated on log-spaced nodes over [alpha_lo(delta) 1e-3, alpha_hi(Delta)].
ComparisonFunction transform_rho(const LyapunovCertificate& cert, double k_target = 1.0);

/// Exponential-form certificate rho o V. Requires rate form and delta > 0.
LyapunovCertificate transform_lyapunov(const LyapunovCertificate& cert,
                                       double k_target = 1.0);

// -- comparison bound --------------------------------------------------------

/// alpha_lo^{-1}(alpha_hi(delta) + c/k) + alpha_lo^{-1}(alpha_hi(|x0|) e^{-kt} + c/k).
double lemma2_bound(const ComparisonFunction& alpha_lo, const ComparisonFunction& alpha_hi,
                    double k, double c, double delta, double x0_norm, double t_elapsed);

// -- safe radius ------------------------------------------------------------

/// Safe radius alpha_hi^{-1}(alpha_lo(b)); requires alpha_hi(a) < alpha_lo(b).
double prop_bound(const ComparisonFunction& alpha_lo, const ComparisonFunction& alpha_hi,
                  double a, double b);

struct NonincreaseWitness {
  double t;
  Vector x;
  double vdot;
};

struct FalsifierReport {
  std::size_t probes = 0;
  std::size_t violations = 0;
  std::optional<NonincreaseWitness> first;
  NonincreaseWitness worst{0.0, Vector(), -kInfinity};
  double seconds = 0.0;
};

struct FalsifierOptions {
  std::size_t samples = 2000;
  std::vector<double> t_grid{0.0, 1.0, 10.0, 100.0};
  std::uint64_t seed = 1;
  double tolerance = 1e-12;
};

/// Samples the annulus H(a, b) x t_grid looking for dV/dt > 0.
FalsifierReport falsify_nonincrease(const ParameterizedSystem& sys, const Vector& theta,
                                    const LyapunovFn& V, const LyapunovGradientFn& grad,
                                    double a, double b, const FalsifierOptions& options = {});

// -- parameter families -----------------------------------------------------

using CertificateFamily = std::function<LyapunovCertificate(const BallPair&)>;

struct ConditionResult {
  std::string name;
  bool holds = true;
  std::size_t probes = 0;
  std::size_t violations = 0;
  double worst_margin = 0.0;
  std::optional<Counterexample> counterexample;
};

struct LimitSequence {
  std::vector<double> arguments;
  std::vector<double> values;
  bool monotone = true;
  bool reaches_target = true;
  bool holds = true;
  std::string note;
};

struct LyapunovUspasReport {
  std::vector<BallPair> pairs;
  std::vector<ConditionResult> sandwich;  ///< per pair
  std::vector<ConditionResult> decrease;  ///< per pair
  LimitSequence condadd;                  ///< alpha_lo^{-1} o alpha_hi (delta) -> 0
  LimitSequence condadd2;                 ///< alpha_hi^{-1} o alpha_lo (Delta) -> inf
  bool holds = false;
};

struct LyapunovUspasOptions {
  std::size_t samples_per_pair = 400;
  std::vector<double> t_grid{0.0, 0.7, 3.1, 17.0, 100.0};
  double limit_tol = 1e-3;
  std::uint64_t seed = 1;
};

/// Falsifies sandwich and decrease conditions on H(delta, Delta) for every
/// pair with delta < Delta, then checks both limit conditions along the
/// sequences (condadd at Delta_seq.front(), condadd2 at delta_seq.front()).
LyapunovUspasReport check_lyapunov_uspas(const ParameterizedSystem& sys,
                                         const CertificateFamily& family,
                                         const std::vector<double>& delta_seq,
                                         const std::vector<double>& Delta_seq,
                                         const LyapunovUspasOptions& options = {});

// -- cascade synthesis ------------------------------------------------------

/// Nondecreasing two-argument bound gamma(Delta1, Delta2) with threshold Delta0.
struct GammaSurface {
  std::function<double(double, double)> fn;
  double Delta0 = 0.0;
  std::string name = "custom";

  double operator()(double D1, double D2) const { return fn(D1, D2); }
};

/// gamma from prop_bound on a composite function W with global bounds:
/// gamma(D1, D2) = prop_bound(alpha_lo, alpha_hi, Delta0, D1).
GammaSurface gamma_from_prop_bound(ComparisonFunction alpha_lo, ComparisonFunction alpha_hi,
                                   double Delta0);

struct Subsystem2Bound {
  KLBound beta2;
  BallPair balls;  ///< (delta2, Delta2)
};

struct SynthesisAudit {
  double delta1 = 0.0, Delta1 = 0.0, delta2 = 0.0, Delta2 = 0.0;
  double k1 = 0.0;
  double c1_Delta1 = 0.0;
  double G_Delta1 = 0.0;
  double gamma = 0.0;
  double Delta0 = 0.0;
};

struct SynthesizedEstimate {
  double delta = 0.0;
  double Delta = 0.0;
  double delta3 = 0.0;
  double delta4 = 0.0;
  double t1 = 0.0;
  double t2 = 0.0;
  std::optional<ComparisonFunction> c3;
  std::optional<ComparisonFunction> eta;
  std::optional<KLBound> beta;
  SynthesisAudit audit;
  bool usas_variant = false;
};

/// Delta, delta3, delta4, delta and c3 (no time constants). Does not require
/// a finite t1, so it is usable with delta2 = 0.
SynthesizedEstimate synthesis_radii(const LyapunovCertificate& cert1,
                                    const Subsystem2Bound& sub2, const ComparisonFunction& G,
                                    const GammaSurface& gamma);

/// Full pipeline: radii, eta, t1, t2 and beta. cert1 must be exponential.
/// Throws EstimateDegenerateError when delta >= Delta and RootFindError when
/// beta2(Delta, t) never drops to delta2 on [0, 1e4].
SynthesizedEstimate synthesize_cascade_bound(const LyapunovCertificate& cert1,
                                             const Subsystem2Bound& sub2,
                                             const ComparisonFunction& G,
                                             const GammaSurface& gamma);

/// Exponential-form variant with delta1 = delta2 = 0 allowed (no transform):
/// beta(s,t) = alpha_lo^{-1}(alpha_hi(s) e^{-kt} + (c1 G / k)(beta2(s,0) e^{-kt/2}
///             + beta2(s, t/2))) + beta2(s, t). Falls back to the standard
/// pipeline when both residual radii are positive.
SynthesizedEstimate usas_variant_check(const LyapunovCertificate& cert1,
                                       const Subsystem2Bound& sub2, const ComparisonFunction& G,
                                       const GammaSurface& gamma);

/// |x(t)|_delta <= beta(|x0|, t - t0) on every sampled point with |x0| <= Delta.
StabilityVerdict validate_bound(const ParameterizedSystem& sys, const Vector& theta,
                                double delta, double Delta, const KLBound& beta,
                                const InitialConditionSampler& sampler, double horizon,
                                const CheckOptions& options = {});

StabilityVerdict validate_estimate(const CascadeSystem& cascade, const Vector& theta,
                                   const SynthesizedEstimate& estimate,
                                   const InitialConditionSampler& sampler, double horizon,
                                   const CheckOptions& options = {});

}  // namespace uspas
