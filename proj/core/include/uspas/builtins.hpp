#pragma once

#include "uspas/cascade_synth.hpp"
#include "uspas/certcheck.hpp"
#include "uspas/sysmodel.hpp"

namespace uspas::builtin {

/// x' = theta0 x in R^dim.
ParameterizedSystem linear(int dim);

/// x' = -theta0 x + theta1 sin(t) (1, ..., 1) in R^dim.
ParameterizedSystem forced_decay(int dim);

/// Scalar cascade x1' = -theta0 x1 + x2, x2' = -theta1 x2; theta = (theta0, theta1).
CascadeSystem linear_cascade();

/// Ingredients for synthesis on linear_cascade().
///
///  V1 = x1^2 / 2, V1' = -2 theta0 V1, |dV1/dx1| = |x1|, |g| = 1,
///  beta2(s, t) = s exp(-theta1 t), and gamma from W = x1^2/2 + p x2^2 with
///  p = max(1, 1 / (8 theta0 theta1)), which is nonincreasing everywhere.
struct LinearCascadeCertificates {
  LyapunovCertificate cert1;
  Subsystem2Bound sub2;
  ComparisonFunction G = ComparisonFunction::constant(1.0);
  GammaSurface gamma;
};

LinearCascadeCertificates linear_cascade_certificates(double theta0, double theta1,
                                                      const BallPair& balls1,
                                                      const BallPair& balls2);

/// Certificates for forced_decay(1) with theta*(delta) = (2 / delta, 1):
/// V = x^2 / 2 with V' <= -x^2 / delta on H(delta, Delta).
CertificateFamily forced_decay_family();

/// Same system with the bounded sandwich s / (2 (1 + s)) <= V <= s / (1 + s),
/// V = 0.75 |x| / (1 + |x|). Its outer radius limit stays at 1.
CertificateFamily forced_decay_bounded_family();

/// theta*(delta) = (2 / delta, 1).
Vector forced_decay_oracle(const BallPair& balls);

}  // namespace uspas::builtin
