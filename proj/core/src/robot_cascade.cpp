#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "uspas/errors.hpp"
#include "uspas/robotlab.hpp"

namespace uspas {
namespace {

struct Split {
  Vector q_tilde, qd, s;
};

Split split_x1(const Vector& x1, int n) {
  return {x1.segment(0, n), x1.segment(n, n), x1.segment(2 * n, n)};
}

void check_setup(const RobotSetup& setup) {
  const int n = setup.model.n;
  if (n <= 0 || !setup.model.D || !setup.model.C || !setup.model.g || !setup.model.U)
    throw ModelError("manipulator model is incomplete");
  if (setup.q_star.size() != n) throw DimensionError("q* has the wrong dimension");
  setup.motor.validate();
  setup.gains.validate();
}

Vector gravity_guess(const RobotSetup& setup) {
  return setup.g_hat.size() == setup.model.n ? setup.g_hat : setup.model.g(setup.q_star);
}

}  // namespace

Vector cascade_theta(const RobotSetup& setup) {
  Vector theta(7);
  theta << setup.gains.kp_prime(), setup.gains.k_d, setup.gains.k_i, setup.gains.eps1,
      setup.motor.R, setup.motor.R_prime, setup.motor.L;
  return theta;
}

CascadeSystem closed_loop_cascade(const RobotSetup& setup) {
  check_setup(setup);
  const ManipulatorModel model = setup.model;
  const int n = model.n;
  const Vector q_star = setup.q_star;
  const Vector g_star = model.g(q_star);
  const double k_t = setup.motor.k_t;

  CascadeSystem c;
  c.name = model.name + "_cascade";
  c.f1.dim = 3 * n;
  c.f1.param_dim = 4;
  c.f1.name = model.name + "_pid";
  c.f1.rhs = [model, n, q_star, g_star](double, const Vector& x1, const Vector& th,
                                        Vector& dx) {
    const double kp_prime = th[0], k_d = th[1], k_i = th[2], eps1 = th[3];
    const Vector q_tilde = x1.segment(0, n);
    const Vector qd = x1.segment(n, n);
    const Vector s = x1.segment(2 * n, n);
    const Vector q = q_star + q_tilde;
    const Vector rhs = -model.C(q, qd) * qd - (model.g(q) - g_star) - kp_prime * q_tilde -
                       k_d * qd - k_i * s;
    dx.segment(0, n) = qd;
    dx.segment(n, n) = model.D(q).llt().solve(rhs);
    dx.segment(2 * n, n) = q_tilde + qd / eps1;
  };

  c.f2.dim = n;
  c.f2.param_dim = 3;
  c.f2.name = "motor_current_error";
  c.f2.rhs = [](double, const Vector& x2, const Vector& th, Vector& dx) {
    dx = -((th[0] + th[1]) / th[2]) * x2;
  };

  c.g = [model, n, q_star, k_t](double, const Vector& x, const Vector&, Matrix& g) {
    const Vector q = q_star + x.segment(0, n);
    g.block(n, 0, n, n) = k_t * model.D(q).inverse();
  };
  return c;
}

ParameterizedSystem direct_closed_loop(const RobotSetup& setup) {
  check_setup(setup);
  const ManipulatorModel model = setup.model;
  const MotorModel motor = setup.motor;
  const int n = model.n;
  const Vector q_star = setup.q_star;

  ParameterizedSystem sys;
  sys.dim = 4 * n;
  sys.param_dim = 7;
  sys.name = model.name + "_direct";
  sys.rhs = [model, motor, n, q_star](double, const Vector& z, const Vector& th, Vector& dz) {
    PidGains gains = PidGains::from_prime(th[0], th[1], th[2], th[3], th[3] / 4.0);
    MotorModel m = motor;
    m.R = th[4];
    m.R_prime = th[5];
    m.L = th[6];
    const Vector q = z.segment(0, n);
    const Vector qd = z.segment(n, n);
    const Vector nu = z.segment(2 * n, n);
    const Vector i = z.segment(3 * n, n);

    const Vector acc = robot_rhs(model, q, qd, m.k_t * i).tail(n);
    const Vector nu_dot = pid_integrator_rhs(gains, q, q_star);
    const Vector u_star = pid_torque(gains, q, qd, nu, q_star);
    const Vector i_star = u_star / m.k_t;
    const Vector di_star = (-gains.k_p * qd - gains.k_d * acc + nu_dot) / m.k_t;
    const Vector v = voltage_law(m, i - i_star, i_star, qd, di_star);

    dz.segment(0, n) = qd;
    dz.segment(n, n) = acc;
    dz.segment(2 * n, n) = nu_dot;
    dz.segment(3 * n, n) = motor_current_rhs(m, i, qd, v);
  };
  return sys;
}

Vector cascade_state_from_direct(const RobotSetup& setup, const Vector& z) {
  const int n = setup.model.n;
  const auto& g = setup.gains;
  const Vector q_tilde = z.segment(0, n) - setup.q_star;
  const Vector qd = z.segment(n, n);
  const Vector nu = z.segment(2 * n, n);
  const Vector i = z.segment(3 * n, n);
  const Vector g_star = setup.model.g(setup.q_star);
  const Vector i_star = pid_torque(g, z.segment(0, n), qd, nu, setup.q_star) / setup.motor.k_t;
  Vector x(4 * n);
  x << q_tilde, qd, q_tilde / g.eps1 + (g_star - nu) / g.k_i, i - i_star;
  return x;
}

Vector direct_state_from_cascade(const RobotSetup& setup, const Vector& x) {
  const int n = setup.model.n;
  const auto& g = setup.gains;
  const Vector q_tilde = x.segment(0, n);
  const Vector qd = x.segment(n, n);
  const Vector s = x.segment(2 * n, n);
  const Vector i_tilde = x.segment(3 * n, n);
  const Vector q = setup.q_star + q_tilde;
  const Vector nu = setup.model.g(setup.q_star) - g.k_i * s + (g.k_i / g.eps1) * q_tilde;
  const Vector i_star = pid_torque(g, q, qd, nu, setup.q_star) / setup.motor.k_t;
  Vector z(4 * n);
  z << q, qd, nu, i_star + i_tilde;
  return z;
}

Vector direct_initial_state(const RobotSetup& setup, const Vector& q0, const Vector& qd0) {
  const int n = setup.model.n;
  const Vector nu = gravity_guess(setup);
  const Vector i_star = pid_torque(setup.gains, q0, qd0, nu, setup.q_star) / setup.motor.k_t;
  Vector z(4 * n);
  z << q0, qd0, nu, i_star;
  return z;
}

double robot_lyapunov(const RobotSetup& setup, const Vector& x1) {
  const int n = setup.model.n;
  const auto& g = setup.gains;
  const auto [q_tilde, qd, s] = split_x1(x1, n);
  const Vector q = setup.q_star + q_tilde;
  const Matrix D = setup.model.D(q);
  const Vector Dqd = D * qd;
  return 0.5 * qd.dot(Dqd) + 0.5 * g.kp_prime() * q_tilde.squaredNorm() +
         setup.model.U(q) - setup.model.U(setup.q_star) -
         q_tilde.dot(setup.model.g(setup.q_star)) + 0.5 * g.eps1 * g.k_i * s.squaredNorm() +
         g.eps1 * q_tilde.dot(Dqd) + g.eps2 * s.dot(Dqd);
}

double robot_lyapunov_rate(const RobotSetup& setup, const Vector& x1, const Vector& i_tilde) {
  const int n = setup.model.n;
  const auto& g = setup.gains;
  const auto [q_tilde, qd, s] = split_x1(x1, n);
  const Vector q = setup.q_star + q_tilde;
  const Matrix D = setup.model.D(q);
  const Matrix Dd = setup.model.inertia_rate(q, qd);
  const Vector g_diff = setup.model.g(q) - setup.model.g(setup.q_star);
  const double kp_prime = g.kp_prime();
  // r = D q''
  const Vector r = -setup.model.C(q, qd) * qd - g_diff - kp_prime * q_tilde - g.k_d * qd -
                   g.k_i * s + setup.motor.k_t * i_tilde;
  const Vector s_dot = q_tilde + qd / g.eps1;
  const Vector Dqd = D * qd;
  const Vector Ddqd = Dd * qd;

  double v = qd.dot(r) + 0.5 * qd.dot(Ddqd);                // kinetic energy
  v += kp_prime * q_tilde.dot(qd);                          // proportional term
  v += g_diff.dot(qd);                                      // potential terms
  v += g.eps1 * g.k_i * s.dot(s_dot);                       // integral state
  v += g.eps1 * (qd.dot(Dqd) + q_tilde.dot(Ddqd) + q_tilde.dot(r));
  v += g.eps2 * (s_dot.dot(Dqd) + s.dot(Ddqd) + s.dot(r));
  return v;
}

double robot_decrease_target(const RobotSetup& setup, const Vector& x1) {
  const int n = setup.model.n;
  const auto& g = setup.gains;
  const auto [q_tilde, qd, s] = split_x1(x1, n);
  return -0.5 * g.k_d * qd.squaredNorm() - 0.5 * g.eps1 * g.kp_prime() * q_tilde.squaredNorm() -
         0.5 * g.eps2 * g.k_i * s.squaredNorm();
}

DecreaseAudit audit_decrease(const RobotSetup& setup, double Delta1, std::size_t samples,
                             std::uint64_t seed, double tol) {
  check_setup(setup);
  const int n = setup.model.n;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vector zero = Vector::Zero(n);
  DecreaseAudit audit;
  for (std::size_t k = 0; k < samples; ++k) {
    Vector x(3 * n);
    for (int i = 0; i < 3 * n; ++i) x[i] = normal(rng);
    // Alternate radius-uniform and volume-uniform radii.
    const double u = unit(rng);
    const double r = Delta1 * (k % 2 == 0 ? u : std::pow(u, 1.0 / (3 * n)));
    x *= r / x.norm();
    if (x.norm() == 0.0) continue;
    const double vdot = robot_lyapunov_rate(setup, x, zero);
    const double target = robot_decrease_target(setup, x);
    const double V = robot_lyapunov(setup, x);
    ++audit.probes;
    audit.worst_ratio = std::max(audit.worst_ratio, vdot / std::abs(target));
    audit.min_V = std::min(audit.min_V, V / x.squaredNorm());
    if (vdot > target * (1.0 - tol) || !(V > 0.0)) ++audit.violations;
  }
  return audit;
}

SemiglobalResult semiglobal_run(const RobotSetup& setup, double Delta1, double radius,
                                std::size_t count, double horizon, double threshold,
                                std::uint64_t seed, const IntegrateOptions& options,
                                int threads) {
  const CascadeSystem cascade = closed_loop_cascade(setup);
  const ParameterizedSystem sys = compose_cascade(cascade);
  const auto sampler = InitialConditionSampler::uniform_ball(sys.dim, radius, count, {0.0}, seed);
  const int n1 = cascade.n1();
  IntegrateOptions opts = options;
  opts.stop_when = [n1, threshold](double, const Vector& x) {
    return x.head(n1).norm() <= threshold;
  };
  const auto trajs = ensemble(sys, sampler, cascade_theta(setup), horizon, opts, threads);
  SemiglobalResult out;
  out.Delta1 = Delta1;
  out.gains = setup.gains;
  out.samples = count;
  out.horizon = horizon;
  for (const auto& tr : trajs) {
    if (!tr.ok()) {
      out.worst_final = kInfinity;
      out.worst_hit_time = kInfinity;
      continue;
    }
    const double final_norm = tr.final_state().head(n1).norm();
    out.worst_final = std::max(out.worst_final, final_norm);
    if (final_norm <= threshold) {
      ++out.converged;
      out.worst_hit_time = std::max(out.worst_hit_time, tr.elapsed.back());
    } else {
      out.worst_hit_time = kInfinity;
    }
  }
  return out;
}

LyapunovCertificate robot_certificate(const RobotSetup& setup, double Delta1,
                                      std::size_t samples, std::uint64_t seed) {
  check_setup(setup);
  const int n = setup.model.n;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vector zero = Vector::Zero(n);
  const RobotSetup captured = setup;
  const LyapunovFn V = [captured](double, const Vector& x1) {
    return robot_lyapunov(captured, x1);
  };

  double lo = kInfinity, hi = 0.0, k = kInfinity, c = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    Vector x(3 * n);
    for (int j = 0; j < 3 * n; ++j) x[j] = normal(rng);
    x *= Delta1 * unit(rng) / x.norm();
    const double r2 = x.squaredNorm();
    if (r2 < 1e-12) continue;
    const double v = robot_lyapunov(setup, x);
    const double vdot = robot_lyapunov_rate(setup, x, zero);
    if (!(v > 0.0) || !(vdot < 0.0))
      throw GainConfigurationError("gains do not certify decrease on B_Delta1");
    lo = std::min(lo, v / r2);
    hi = std::max(hi, v / r2);
    k = std::min(k, -vdot / v);
    c = std::max(c, finite_difference_gradient(V, 0.0, x).dx.norm() / std::sqrt(r2));
  }
  LyapunovCertificate cert;
  cert.V = V;
  cert.alpha_lo = ComparisonFunction::power(0.9 * lo, 2.0);
  cert.alpha_hi = ComparisonFunction::power(1.1 * hi, 2.0);
  cert.decay = ExponentialDecay{0.9 * k};
  cert.c = ComparisonFunction::linear(1.1 * c);
  cert.annulus = BallPair{0.0, Delta1};
  cert.theta = cascade_theta(setup).head(4);
  return cert;
}

}  // namespace uspas
