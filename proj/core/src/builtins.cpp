#include "uspas/builtins.hpp"

#include <algorithm>
#include <cmath>

#include "uspas/errors.hpp"

namespace uspas::builtin {

ParameterizedSystem linear(int dim) {
  if (dim <= 0) throw DimensionError("linear system needs dim >= 1");
  ParameterizedSystem sys;
  sys.dim = dim;
  sys.param_dim = 1;
  sys.name = "linear";
  sys.rhs = [](double, const Vector& x, const Vector& th, Vector& dx) { dx = th[0] * x; };
  return sys;
}

ParameterizedSystem forced_decay(int dim) {
  if (dim <= 0) throw DimensionError("forced_decay needs dim >= 1");
  ParameterizedSystem sys;
  sys.dim = dim;
  sys.param_dim = 2;
  sys.name = "forced_decay";
  sys.rhs = [](double t, const Vector& x, const Vector& th, Vector& dx) {
    dx = -th[0] * x;
    dx.array() += th[1] * std::sin(t);
  };
  return sys;
}

CascadeSystem linear_cascade() {
  CascadeSystem c;
  c.name = "linear_cascade";
  c.f1.dim = 1;
  c.f1.param_dim = 1;
  c.f1.name = "x1";
  c.f1.rhs = [](double, const Vector& x, const Vector& th, Vector& dx) { dx = -th[0] * x; };
  c.f2.dim = 1;
  c.f2.param_dim = 1;
  c.f2.name = "x2";
  c.f2.rhs = [](double, const Vector& x, const Vector& th, Vector& dx) { dx = -th[0] * x; };
  c.g = [](double, const Vector&, const Vector&, Matrix& g) { g(0, 0) = 1.0; };
  return c;
}

LinearCascadeCertificates linear_cascade_certificates(double theta0, double theta1,
                                                      const BallPair& balls1,
                                                      const BallPair& balls2) {
  if (!(theta0 > 0.0 && theta1 > 0.0))
    throw PreconditionError("linear cascade certificates need theta0, theta1 > 0");
  LyapunovCertificate c;
  c.V = [](double, const Vector& x) { return 0.5 * x.squaredNorm(); };
  c.grad = [](double, const Vector& x) { return Gradient{0.0, x}; };
  c.alpha_lo = ComparisonFunction::power(0.5, 2.0);
  c.alpha_hi = ComparisonFunction::power(0.5, 2.0);
  c.decay = ExponentialDecay{2.0 * theta0};
  c.c = ComparisonFunction::identity();
  c.annulus = balls1;
  c.theta = Vector::Constant(1, theta0);

  const double p = std::max(1.0, 1.0 / (8.0 * theta0 * theta1));
  return LinearCascadeCertificates{
      std::move(c),
      Subsystem2Bound{KLBound::product(ComparisonFunction::identity(), theta1), balls2},
      ComparisonFunction::constant(1.0),
      gamma_from_prop_bound(ComparisonFunction::power(0.5, 2.0),
                            ComparisonFunction::power(p, 2.0), 0.0)};
}

CertificateFamily forced_decay_family() {
  return [](const BallPair& b) {
    LyapunovCertificate c;
    c.V = [](double, const Vector& x) { return 0.5 * x.squaredNorm(); };
    c.grad = [](double, const Vector& x) { return Gradient{0.0, x}; };
    c.alpha_lo = ComparisonFunction::power(0.5, 2.0);
    c.alpha_hi = ComparisonFunction::power(0.5, 2.0);
    c.decay = RateDecay{ComparisonFunction::power(1.0 / b.delta, 2.0)};
    c.c = ComparisonFunction::identity();
    c.annulus = b;
    c.theta = forced_decay_oracle(b);
    return c;
  };
}

CertificateFamily forced_decay_bounded_family() {
  return [](const BallPair& b) {
    LyapunovCertificate c;
    c.V = [](double, const Vector& x) {
      const double r = x.norm();
      return 0.75 * r / (1.0 + r);
    };
    c.alpha_lo = ComparisonFunction::custom(
        Kind::K, [](double s) { return 0.5 * s / (1.0 + s); }, "half_rational", 0.5);
    c.alpha_hi = ComparisonFunction::custom(
        Kind::K, [](double s) { return s / (1.0 + s); }, "rational", 1.0);
    // dV/d|x| = 0.75 / (1 + |x|)^2 >= 0.75 / (1 + Delta)^2 on the annulus.
    const double slope = 0.75 / ((1.0 + b.Delta) * (1.0 + b.Delta) * b.delta);
    c.decay = RateDecay{ComparisonFunction::linear(slope)};
    c.annulus = b;
    c.theta = forced_decay_oracle(b);
    return c;
  };
}

Vector forced_decay_oracle(const BallPair& balls) {
  if (!(balls.delta > 0.0)) throw PreconditionError("forced_decay oracle needs delta > 0");
  Vector th(2);
  th << 2.0 / balls.delta, 1.0;
  return th;
}

}  // namespace uspas::builtin
