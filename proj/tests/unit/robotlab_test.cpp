#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <gtest/gtest.h>

#include "uspas/errors.hpp"
#include "uspas/robotlab.hpp"

using uspas::Matrix;
using uspas::Vector;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

uspas::GainSchedule bundled_schedule() {
  return uspas::load_gain_schedule(std::string(USPAS_DATA_DIR) + "/robot_gain_schedule.json");
}

uspas::RobotSetup arm_setup(double Delta1 = 1.0) {
  uspas::RobotSetup s;
  s.model = uspas::two_link_arm();
  s.gains = uspas::gain_schedule(Delta1, bundled_schedule());
  s.q_star = vec({M_PI / 4, M_PI / 6});
  s.g_hat = uspas::default_gravity_guess(s.model, s.q_star);
  return s;
}

uspas::IntegrateOptions tight() {
  uspas::IntegrateOptions o;
  o.method = uspas::Rk45{1e-11, 1e-13};
  return o;
}

// Plant driven by PID torque directly, state (q, q', nu).
uspas::ParameterizedSystem pid_loop(const uspas::RobotSetup& s) {
  const int n = s.model.n;
  return {3 * n, 0,
          [s, n](double, const Vector& z, const Vector&, Vector& dz) {
            const Vector q = z.segment(0, n), qd = z.segment(n, n), nu = z.segment(2 * n, n);
            const Vector u = uspas::pid_torque(s.gains, q, qd, nu, s.q_star);
            dz.head(2 * n) = uspas::robot_rhs(s.model, q, qd, u);
            dz.tail(n) = uspas::pid_integrator_rhs(s.gains, q, s.q_star);
          },
          std::nullopt, "pid_loop"};
}

double energy(const uspas::ManipulatorModel& m, const Vector& x) {
  const int n = m.n;
  return m.kinetic_energy(x.head(n), x.tail(n)) + m.U(x.head(n));
}

}  // namespace

TEST(RobotRhs, GravityCompensationHolds) {
  auto m = uspas::two_link_arm();
  const Vector q = vec({0.4, -1.1});
  auto d = uspas::robot_rhs(m, q, Vector::Zero(2), m.g(q));
  EXPECT_LE(d.norm(), 1e-12);
}

TEST(RobotRhs, RestsAtPotentialMinimum) {
  auto m = uspas::two_link_arm();
  // both links hanging straight down
  const Vector q = vec({-M_PI / 2, 0.0});
  auto d = uspas::robot_rhs(m, q, Vector::Zero(2), Vector::Zero(2));
  EXPECT_LE(d.norm(), 1e-12);
}

TEST(RobotRhs, ConservesEnergyUnforced) {
  auto m = uspas::two_link_arm();
  uspas::ParameterizedSystem sys{4, 0, [m](double, const Vector& x, const Vector&, Vector& dx) {
                                   dx = uspas::robot_rhs(m, x.head(2), x.tail(2),
                                                         Vector::Zero(2));
                                 }};
  uspas::IntegrateOptions o;
  o.method = uspas::Rk4{1e-4};
  const Vector x0 = vec({0.3, 1.2, 0.5, -0.7});
  auto tr = uspas::integrate(sys, 0.0, x0, Vector(), 5.0, o);
  const double e0 = energy(m, x0);
  for (const auto& x : tr.states) EXPECT_LE(std::abs(energy(m, x) - e0), 1e-6 * std::abs(e0));
}

TEST(ManipulatorModel, SkewSymmetryAndBounds) {
  auto m = uspas::two_link_arm();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 2000; ++k) {
    const Vector q = vec({u(rng), u(rng)}), qd = vec({u(rng), u(rng)}), x = vec({u(rng), u(rng)});
    const Matrix N = m.inertia_rate(q, qd) - 2.0 * m.C(q, qd);
    EXPECT_LE(std::abs(x.dot(N * x)), 1e-9);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m.D(q));
    EXPECT_GE(eig.eigenvalues().minCoeff(), m.d_m * (1 - 1e-9));
    EXPECT_LE(eig.eigenvalues().maxCoeff(), m.d_M * (1 + 1e-9));
  }
}

TEST(ManipulatorModel, GravityIsPotentialGradient) {
  auto m = uspas::two_link_arm();
  const Vector q = vec({0.7, -0.2});
  const double h = 1e-6;
  for (int i = 0; i < 2; ++i) {
    Vector e = Vector::Zero(2);
    e[i] = h;
    EXPECT_NEAR((m.U(q + e) - m.U(q - e)) / (2 * h), m.g(q)[i], 1e-6);
  }
}

TEST(Pid, EquilibriumTorque) {
  auto s = arm_setup();
  const Vector g_star = s.model.g(s.q_star);
  EXPECT_LE((uspas::pid_torque(s.gains, s.q_star, Vector::Zero(2), g_star, s.q_star) - g_star)
                .norm(),
            1e-14);
  EXPECT_EQ(uspas::pid_integrator_rhs(s.gains, s.q_star, s.q_star).norm(), 0.0);
  EXPECT_GT(uspas::pid_integrator_rhs(s.gains, s.q_star + vec({0.1, 0}), s.q_star).norm(), 0.0);
}

TEST(Pid, SingleLinkMatchesLinearization) {
  uspas::RobotSetup s;
  s.model = uspas::one_link_arm();
  s.gains.k_p = 20;
  s.gains.k_d = 5;
  s.gains.k_i = 1;
  s.q_star = vec({0.3});
  const double D = s.model.D(s.q_star)(0, 0);
  const double A = 1.0 * 0.5 * 9.81;
  const double dg = -A * std::sin(0.3);
  Matrix lin(3, 3);
  lin << 0, 1, 0, -(s.gains.k_p + dg) / D, -s.gains.k_d / D, 1 / D, -s.gains.k_i, 0, 0;

  const double amp = 1e-4;
  const Vector z0 = vec({0.3 + amp, 0, s.model.g(s.q_star)[0]});
  auto tr = uspas::integrate(pid_loop(s), 0.0, z0, Vector(), 3.0, tight());
  const Vector w0 = vec({amp, 0, 0});
  for (std::size_t k = 0; k < tr.size(); k += 40) {
    const Vector w = (lin * tr.elapsed[k]).exp() * w0;
    EXPECT_NEAR(tr.states[k][0] - 0.3, w[0], 1e-3 * amp) << tr.elapsed[k];
  }
}

TEST(VoltageLaw, CurrentErrorDecaysAtMotorPole) {
  uspas::MotorModel m;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  for (int k = 0; k < 50; ++k) {
    const Vector it = vec({n01(rng), n01(rng)}), is = vec({n01(rng), n01(rng)});
    const Vector qd = vec({n01(rng), n01(rng)}), dis = vec({n01(rng), n01(rng)});
    const Vector v = uspas::voltage_law(m, it, is, qd, dis);
    const Vector di_tilde = uspas::motor_current_rhs(m, is + it, qd, v) - dis;
    EXPECT_LE((di_tilde + m.pole() * it).norm(), 1e-10 * (1 + it.norm() * m.pole()));
  }
}

TEST(VoltageLaw, TracksReferenceFromZeroError) {
  auto s = arm_setup();
  auto sys = uspas::direct_closed_loop(s);
  const Vector z0 = uspas::direct_initial_state(s, vec({0.5, 0.2}), vec({0.1, -0.3}));
  auto tr = uspas::integrate(sys, 0.0, z0, uspas::cascade_theta(s), 1.0, tight());
  for (const auto& z : tr.states)
    EXPECT_LE(uspas::cascade_state_from_direct(s, z).tail(2).norm(), 1e-8);
}

TEST(VoltageLaw, ErrorAtOneTimeConstant) {
  auto s = arm_setup();
  auto c = uspas::closed_loop_cascade(s);
  const double tau = s.motor.L / (s.motor.R + s.motor.R_prime);
  const Vector th = uspas::cascade_theta(s).tail(3);
  auto tr = uspas::integrate(c.f2, 0.0, vec({1.0, -2.0}), th, tau, tight());
  EXPECT_NEAR(tr.final_state()[0], std::exp(-1.0), 1e-9);
  EXPECT_NEAR(tr.final_state()[1], -2 * std::exp(-1.0), 1e-9);
}

TEST(VoltageLaw, ReferenceDerivativeMatchesDifferences) {
  auto s = arm_setup();
  auto sys = uspas::direct_closed_loop(s);
  const Vector theta = uspas::cascade_theta(s);
  const Vector z = vec({0.4, 0.9, 0.3, -0.2, 5.0, 4.0, 1.0, -1.0});
  const Vector dz = sys(0.0, z, theta);
  auto i_star = [&](const Vector& w) -> Vector {
    return uspas::pid_torque(s.gains, w.head(2), w.segment(2, 2), w.segment(4, 2), s.q_star) /
           s.motor.k_t;
  };
  // di*/dt from the cascade's current error: i~' = i' - i*'
  const Vector it = uspas::cascade_state_from_direct(s, z).tail(2);
  const Vector analytic = dz.tail(2) + s.motor.pole() * it;
  const double h = 1e-6;
  const Vector numeric = (i_star(z + h * dz) - i_star(z - h * dz)) / (2 * h);
  EXPECT_LE((analytic - numeric).norm(), 1e-6 * (1 + numeric.norm()));
}

TEST(Cascade, EquilibriumIsStationary) {
  auto s = arm_setup();
  auto sys = uspas::compose_cascade(uspas::closed_loop_cascade(s));
  EXPECT_LE(sys(0.0, Vector::Zero(8), uspas::cascade_theta(s)).norm(), 1e-12);
}

TEST(Cascade, RejectsNonPositiveKpPrime) {
  auto s = arm_setup();
  s.gains.k_p = s.gains.k_i / s.gains.eps1 * 0.5;
  EXPECT_THROW(uspas::closed_loop_cascade(s), uspas::GainConfigurationError);
}

TEST(Cascade, ZeroCurrentErrorMatchesPidLoop) {
  auto s = arm_setup();
  auto sys = uspas::compose_cascade(uspas::closed_loop_cascade(s));
  const Vector z0 = vec({1.1, 0.1, 0.3, -0.4, 6.0, 3.0});
  auto direct = uspas::integrate(pid_loop(s), 0.0, z0, Vector(), 5.0, tight());
  Vector full(8);
  full << z0, Vector::Zero(2);
  full.tail(2) =
      uspas::pid_torque(s.gains, z0.head(2), z0.segment(2, 2), z0.tail(2), s.q_star) /
      s.motor.k_t;
  const Vector x0 = uspas::cascade_state_from_direct(s, full);
  ASSERT_LE(x0.tail(2).norm(), 1e-14);
  auto casc = uspas::integrate(sys, 0.0, x0, uspas::cascade_theta(s), 5.0, tight());
  ASSERT_EQ(direct.size(), casc.size());
  for (std::size_t k = 0; k < casc.size(); ++k) {
    Vector z(8);
    z << direct.states[k], Vector::Zero(2);
    z.tail(2) = uspas::pid_torque(s.gains, z.head(2), z.segment(2, 2), z.segment(4, 2),
                                  s.q_star) /
                 s.motor.k_t;
    EXPECT_LE((uspas::cascade_state_from_direct(s, z).head(6) - casc.states[k].head(6)).norm(),
              1e-8);
  }
}

TEST(Cascade, StackedMatchesDirectClosedLoop) {
  auto s = arm_setup();
  auto sys = uspas::compose_cascade(uspas::closed_loop_cascade(s));
  auto direct = uspas::direct_closed_loop(s);
  const Vector theta = uspas::cascade_theta(s);
  const Vector x0 = vec({0.5, -0.3, 0.2, 0.4, 0.1, -0.2, 0.3, -0.1});
  const Vector z0 = uspas::direct_state_from_cascade(s, x0);
  EXPECT_LE((uspas::cascade_state_from_direct(s, z0) - x0).norm(), 1e-12);
  auto a = uspas::integrate(sys, 0.0, x0, theta, 10.0, tight());
  auto b = uspas::integrate(direct, 0.0, z0, theta, 10.0, tight());
  ASSERT_EQ(a.size(), b.size());
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    worst = std::max(worst, (uspas::cascade_state_from_direct(s, b.states[k]) - a.states[k])
                                .lpNorm<Eigen::Infinity>());
  EXPECT_LE(worst, 1e-7);
}

TEST(Cascade, InterconnectionBoundedByConstant) {
  auto s = arm_setup();
  auto c = uspas::closed_loop_cascade(s);
  const double G = s.motor.k_t / s.model.d_m;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int k = 0; k < 500; ++k) {
    Vector x(8);
    for (int i = 0; i < 8; ++i) x[i] = u(rng);
    const Matrix g = c.interconnection(0.0, x, uspas::cascade_theta(s));
    EXPECT_LE(g.operatorNorm(), G * (1 + 1e-9));
  }
}

TEST(GainSchedule, AffineInDelta1) {
  uspas::GainSchedule gs{1, 2, 3, 4, 5, 6};
  auto base = uspas::gain_schedule(0.0, gs);
  EXPECT_EQ(base.k_d, 1);
  EXPECT_NEAR(base.kp_prime(), 3, 1e-12);
  EXPECT_EQ(base.k_i, 5);
  auto a = uspas::gain_schedule(2.0, gs), b = uspas::gain_schedule(4.0, gs);
  EXPECT_DOUBLE_EQ(b.k_d - 1, 2 * (a.k_d - 1));
  EXPECT_NEAR(b.kp_prime() - 3, 2 * (a.kp_prime() - 3), 1e-9);
  EXPECT_DOUBLE_EQ(b.k_i - 5, 2 * (a.k_i - 5));
  EXPECT_DOUBLE_EQ(uspas::schedule_eps1(10.0), 0.025);
  EXPECT_DOUBLE_EQ(b.eps2, b.eps1 / 4);
}

TEST(RobotLyapunov, ZeroAtEquilibrium) {
  auto s = arm_setup();
  EXPECT_NEAR(uspas::robot_lyapunov(s, Vector::Zero(6)), 0.0, 1e-12);
}

TEST(RobotLyapunov, RateMatchesFiniteDifferences) {
  auto s = arm_setup(5.0);
  auto c = uspas::closed_loop_cascade(s);
  const Vector th1 = uspas::cascade_theta(s).head(4);
  uspas::LyapunovFn V = [s](double, const Vector& x) { return uspas::robot_lyapunov(s, x); };
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  for (int k = 0; k < 50; ++k) {
    Vector x(6), it(2);
    for (int i = 0; i < 6; ++i) x[i] = n01(rng);
    it << n01(rng), n01(rng);
    Vector full(8);
    full << x, it;
    Vector dx = c.f1(0.0, x, th1) + c.interconnection(0.0, full, th1) * it;
    const double numeric = uspas::finite_difference_gradient(V, 0.0, x).dx.dot(dx);
    const double analytic = uspas::robot_lyapunov_rate(s, x, it);
    EXPECT_NEAR(analytic, numeric, 1e-5 * (1 + std::abs(numeric)));
  }
}

TEST(RobotLyapunov, CalibratedGainsDecrease) {
  for (double D1 : {1.0, 5.0, 10.0}) {
    auto audit = uspas::audit_decrease(arm_setup(D1), D1, 100, 99);
    EXPECT_EQ(audit.violations, 0u) << D1;
    EXPECT_GT(audit.min_V, 0.0);
  }
}

TEST(Semiglobal, SmallBallConverges) {
  auto s = arm_setup(1.0);
  uspas::IntegrateOptions o;
  o.method = uspas::Rk45{1e-6, 1e-9};
  auto r = uspas::semiglobal_run(s, 1.0, 0.9, 4, 20.0 / s.gains.eps1, 1e-3, 5, o);
  EXPECT_EQ(r.converged, r.samples);
  EXPECT_LT(r.worst_hit_time, r.horizon);
}
