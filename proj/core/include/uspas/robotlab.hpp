#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "uspas/cascade_synth.hpp"
#include "uspas/certcheck.hpp"
#include "uspas/sysmodel.hpp"

namespace uspas {

/// Rigid-joint manipulator D(q) q'' + C(q, q') q' + g(q) = u.
struct ManipulatorModel {
  int n = 0;
  std::function<Matrix(const Vector& q)> D;
  std::function<Matrix(const Vector& q, const Vector& qd)> C;
  std::function<Vector(const Vector& q)> g;
  std::function<double(const Vector& q)> U;
  /// dD/dt along q'; optional (finite differences otherwise).
  std::function<Matrix(const Vector& q, const Vector& qd)> Ddot;
  /// d_m <= |D(q)| <= d_M, |C(q, q')| <= k_c |q'|, |dg/dq| <= k_g.
  double d_m = 0.0;
  double d_M = 0.0;
  double k_c = 0.0;
  double k_g = 0.0;
  std::string name;

  Matrix inertia_rate(const Vector& q, const Vector& qd) const;
  double kinetic_energy(const Vector& q, const Vector& qd) const;
};

struct PlanarArmParams {
  double m1 = 1.0, m2 = 1.0;
  double l1 = 1.0, l2 = 1.0;
  double lc1 = 0.5, lc2 = 0.5;
  double I1 = 1.0 / 12.0, I2 = 1.0 / 12.0;
  double gravity = 9.81;
};

/// Two-link planar revolute arm; bound constants filled by estimate_constants.
ManipulatorModel two_link_arm(const PlanarArmParams& p = {});
/// Single pendulum-like link.
ManipulatorModel one_link_arm(double m = 1.0, double lc = 0.5, double I = 1.0 / 12.0,
                              double gravity = 9.81);

struct ModelConstants {
  double d_m = 0.0, d_M = 0.0, k_c = 0.0, k_g = 0.0;
};

/// Sampled bound constants: extreme eigenvalues of D, max |C| / |q'| and
/// max |dg/dq| (spectral norms) over random configurations.
ModelConstants estimate_constants(const ManipulatorModel& model, std::size_t samples = 20000,
                                  std::uint64_t seed = 7);

/// Identical DC motors L di/dt = -R i - k_b q' + v, torque k_t i.
struct MotorModel {
  double L = 0.01;
  double R = 1.0;
  double R_prime = 9.0;
  double k_b = 0.1;
  double k_t = 1.0;

  void validate() const;
  /// Closed-loop current-error pole (R + R') / L.
  double pole() const { return (R + R_prime) / L; }
};

struct PidGains {
  double k_p = 0.0;
  double k_d = 0.0;
  double k_i = 0.0;
  double eps1 = 0.1;
  double eps2 = 0.025;

  /// k_p' = k_p - k_i / eps1.
  double kp_prime() const { return k_p - k_i / eps1; }
  static PidGains from_prime(double kp_prime, double k_d, double k_i, double eps1, double eps2);
  /// Throws GainConfigurationError unless every gain is positive and k_p' > 0.
  void validate() const;
};

/// k_d = a_d + b_d D1, k_p' = a_p + b_p D1, k_i = a_i + b_i D1,
/// eps1 = min(0.1, 1 / (4 D1)), eps2 = eps1 / 4.
struct GainSchedule {
  double a_d = 0.0, b_d = 0.0;
  double a_p = 0.0, b_p = 0.0;
  double a_i = 0.0, b_i = 0.0;

  PidGains operator()(double Delta1) const;
};

PidGains gain_schedule(double Delta1, const GainSchedule& schedule);
double schedule_eps1(double Delta1);

/// Reads the "schedule" object of a calibration data file.
GainSchedule load_gain_schedule(const std::string& path);

// -- component laws ---------------------------------------------------------

/// (q', q'') with q'' = D^{-1}(u - C q' - g).
Vector robot_rhs(const ManipulatorModel& model, const Vector& q, const Vector& qd,
                 const Vector& u);
/// u* = -k_p (q - q*) - k_d q' + nu.
Vector pid_torque(const PidGains& gains, const Vector& q, const Vector& qd, const Vector& nu,
                  const Vector& q_star);
/// nu' = -k_i (q - q*).
Vector pid_integrator_rhs(const PidGains& gains, const Vector& q, const Vector& q_star);
/// v = -R' i~ + R i* + k_b q' + L di*/dt with i~ = i - i*; gives
/// di~/dt = -((R + R') / L) i~.
Vector voltage_law(const MotorModel& motor, const Vector& i_tilde, const Vector& i_star,
                   const Vector& qd, const Vector& di_star_dt);
/// di/dt of the motor electrical equation.
Vector motor_current_rhs(const MotorModel& motor, const Vector& i, const Vector& qd,
                         const Vector& v);

struct RobotSetup {
  ManipulatorModel model;
  MotorModel motor;
  PidGains gains;
  Vector q_star;
  /// Gravity guess used to initialize the integrator state.
  Vector g_hat;
};

/// g(q*) with a relative perturbation on one joint.
Vector default_gravity_guess(const ManipulatorModel& model, const Vector& q_star,
                             double perturbation = 0.1, int joint = 0);

/// Cascade in x1 = (q~, q', s), x2 = i~. Parameters theta1 = (k_p', k_d,
/// k_i, eps1), theta2 = (R, R', L); the interconnection is k_t D(q)^{-1} in
/// the q'' rows.
CascadeSystem closed_loop_cascade(const RobotSetup& setup);
Vector cascade_theta(const RobotSetup& setup);

/// Plant, motors, PID and voltage law in the original coordinates
/// z = (q, q', nu, i); theta as for the cascade.
ParameterizedSystem direct_closed_loop(const RobotSetup& setup);

/// Coordinate maps between z = (q, q', nu, i) and x = (q~, q', s, i~).
Vector cascade_state_from_direct(const RobotSetup& setup, const Vector& z);
Vector direct_state_from_cascade(const RobotSetup& setup, const Vector& x);

/// Start of a PID run: nu(0) = g_hat, motor current at its reference.
Vector direct_initial_state(const RobotSetup& setup, const Vector& q0, const Vector& qd0);

/// V1 on x1 = (q~, q', s).
double robot_lyapunov(const RobotSetup& setup, const Vector& x1);
/// dV1/dt along the cascade with current error i~ (zero for the PID loop).
double robot_lyapunov_rate(const RobotSetup& setup, const Vector& x1, const Vector& i_tilde);
/// -(k_d/2)|q'|^2 - (eps1 k_p'/2)|q~|^2 - (eps2 k_i/2)|s|^2.
double robot_decrease_target(const RobotSetup& setup, const Vector& x1);

// -- experiments ------------------------------------------------------------

struct DecreaseAudit {
  std::size_t probes = 0;
  std::size_t violations = 0;
  double worst_ratio = -kInfinity;  ///< max of Vdot / |target| (<= -1 + tol passes)
  double min_V = kInfinity;         ///< smallest V1 / |x1|^2 seen
};

/// Samples B_{Delta1} (i~ = 0) and tests V1' <= target (1 - tol) and V1 > 0.
DecreaseAudit audit_decrease(const RobotSetup& setup, double Delta1, std::size_t samples,
                             std::uint64_t seed, double tol = 1e-9);

struct SemiglobalResult {
  double Delta1 = 0.0;
  PidGains gains;
  std::size_t samples = 0;
  std::size_t converged = 0;
  double worst_final = 0.0;     ///< largest |x1| at the end of a run
  double worst_hit_time = 0.0;  ///< latest first time |x1| <= threshold (inf if missed)
  double horizon = 0.0;
};

/// Integrates the stacked cascade from `count` states uniform in B_{radius}
/// (full state, i~ included) and counts those reaching |x1| <= threshold
/// within the horizon. Runs stop at the first recorded state that does.
SemiglobalResult semiglobal_run(const RobotSetup& setup, double Delta1, double radius,
                                std::size_t count, double horizon, double threshold,
                                std::uint64_t seed, const IntegrateOptions& options = {},
                                int threads = 0);

/// Empirical exponential certificate for the PID loop on B_{Delta1}: quadratic
/// sandwich bounds, decay rate and linear gradient bound fitted on samples
/// with safety margins. Used by the USAS variant.
LyapunovCertificate robot_certificate(const RobotSetup& setup, double Delta1,
                                      std::size_t samples, std::uint64_t seed);

}  // namespace uspas
