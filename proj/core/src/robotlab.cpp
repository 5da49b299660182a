#include "uspas/robotlab.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "uspas/errors.hpp"

namespace uspas {
namespace {

double spectral_norm(const Matrix& m) {
  return Eigen::JacobiSVD<Matrix>(m).singularValues()(0);
}

Matrix gravity_jacobian(const ManipulatorModel& model, const Vector& q) {
  Matrix J(model.n, model.n);
  Vector qp = q;
  for (int j = 0; j < model.n; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(q[j]));
    qp[j] = q[j] + h;
    const Vector up = model.g(qp);
    qp[j] = q[j] - h;
    const Vector down = model.g(qp);
    qp[j] = q[j];
    J.col(j) = (up - down) / (2.0 * h);
  }
  return J;
}

void require_dim(const Vector& v, int n, const char* what) {
  if (v.size() != n)
    throw DimensionError(std::string(what) + " has dimension " + std::to_string(v.size()) +
                         ", expected " + std::to_string(n));
}

}  // namespace

Matrix ManipulatorModel::inertia_rate(const Vector& q, const Vector& qd) const {
  if (Ddot) return Ddot(q, qd);
  // dD/dt = sum_j dD/dq_j qd_j by central differences.
  Matrix out = Matrix::Zero(n, n);
  Vector qp = q;
  for (int j = 0; j < n; ++j) {
    const double h = 1e-6 * (1.0 + std::abs(q[j]));
    qp[j] = q[j] + h;
    const Matrix up = D(qp);
    qp[j] = q[j] - h;
    const Matrix down = D(qp);
    qp[j] = q[j];
    out += (up - down) / (2.0 * h) * qd[j];
  }
  return out;
}

double ManipulatorModel::kinetic_energy(const Vector& q, const Vector& qd) const {
  return 0.5 * qd.dot(D(q) * qd);
}

ManipulatorModel two_link_arm(const PlanarArmParams& p) {
  ManipulatorModel m;
  m.n = 2;
  m.name = "two_link_arm";
  const double d11c = p.m1 * p.lc1 * p.lc1 + p.m2 * (p.l1 * p.l1 + p.lc2 * p.lc2) + p.I1 + p.I2;
  const double d12c = p.m2 * p.lc2 * p.lc2 + p.I2;
  const double b = p.m2 * p.l1 * p.lc2;
  const double A = (p.m1 * p.lc1 + p.m2 * p.l1) * p.gravity;
  const double B = p.m2 * p.lc2 * p.gravity;

  m.D = [=](const Vector& q) {
    const double c2 = std::cos(q[1]);
    Matrix D(2, 2);
    D << d11c + 2.0 * b * c2, d12c + b * c2, d12c + b * c2, d12c;
    return D;
  };
  m.C = [=](const Vector& q, const Vector& qd) {
    const double h = -b * std::sin(q[1]);
    Matrix C(2, 2);
    C << h * qd[1], h * (qd[0] + qd[1]), -h * qd[0], 0.0;
    return C;
  };
  m.Ddot = [=](const Vector& q, const Vector& qd) {
    const double h = -b * std::sin(q[1]);
    Matrix Dd(2, 2);
    Dd << 2.0 * h * qd[1], h * qd[1], h * qd[1], 0.0;
    return Dd;
  };
  m.g = [=](const Vector& q) {
    const double c12 = std::cos(q[0] + q[1]);
    Vector g(2);
    g << A * std::cos(q[0]) + B * c12, B * c12;
    return g;
  };
  m.U = [=](const Vector& q) { return A * std::sin(q[0]) + B * std::sin(q[0] + q[1]); };

  const auto c = estimate_constants(m);
  m.d_m = c.d_m;
  m.d_M = c.d_M;
  m.k_c = c.k_c;
  m.k_g = c.k_g;
  return m;
}

ManipulatorModel one_link_arm(double mass, double lc, double I, double gravity) {
  ManipulatorModel m;
  m.n = 1;
  m.name = "one_link_arm";
  const double inertia = I + mass * lc * lc;
  const double A = mass * lc * gravity;
  m.D = [=](const Vector&) { return Matrix::Constant(1, 1, inertia); };
  m.C = [](const Vector&, const Vector&) { return Matrix::Zero(1, 1).eval(); };
  m.Ddot = [](const Vector&, const Vector&) { return Matrix::Zero(1, 1).eval(); };
  m.g = [=](const Vector& q) { return Vector::Constant(1, A * std::cos(q[0])); };
  m.U = [=](const Vector& q) { return A * std::sin(q[0]); };
  m.d_m = m.d_M = inertia;
  m.k_c = 0.0;
  m.k_g = A;
  return m;
}

ModelConstants estimate_constants(const ManipulatorModel& model, std::size_t samples,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::normal_distribution<double> normal(0.0, 1.0);
  ModelConstants c;
  c.d_m = kInfinity;
  for (std::size_t k = 0; k < samples; ++k) {
    Vector q(model.n), qd(model.n);
    for (int i = 0; i < model.n; ++i) {
      q[i] = angle(rng);
      qd[i] = normal(rng);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(model.D(q));
    c.d_m = std::min(c.d_m, eig.eigenvalues().minCoeff());
    c.d_M = std::max(c.d_M, eig.eigenvalues().maxCoeff());
    if (qd.norm() > 1e-12) c.k_c = std::max(c.k_c, spectral_norm(model.C(q, qd)) / qd.norm());
    c.k_g = std::max(c.k_g, spectral_norm(gravity_jacobian(model, q)));
  }
  return c;
}

void MotorModel::validate() const {
  if (!(L > 0.0 && R > 0.0 && R_prime > 0.0 && k_b > 0.0 && k_t > 0.0))
    throw ModelError("motor constants L, R, R', k_b, k_t must be positive");
}

PidGains PidGains::from_prime(double kp_prime, double k_d, double k_i, double eps1,
                              double eps2) {
  PidGains g;
  g.k_d = k_d;
  g.k_i = k_i;
  g.eps1 = eps1;
  g.eps2 = eps2;
  g.k_p = kp_prime + k_i / eps1;
  return g;
}

void PidGains::validate() const {
  if (!(k_p > 0.0 && k_d > 0.0 && k_i > 0.0))
    throw GainConfigurationError("PID gains must be positive");
  if (!(eps1 > 0.0 && eps2 > 0.0))
    throw GainConfigurationError("eps1 and eps2 must be positive");
  if (!(kp_prime() > 0.0))
    throw GainConfigurationError("k_p' = k_p - k_i/eps1 must be positive, got " +
                                 std::to_string(kp_prime()));
}

double schedule_eps1(double Delta1) {
  return Delta1 > 0.0 ? std::min(0.1, 1.0 / (4.0 * Delta1)) : 0.1;
}

PidGains GainSchedule::operator()(double Delta1) const { return gain_schedule(Delta1, *this); }

PidGains gain_schedule(double Delta1, const GainSchedule& s) {
  if (!(Delta1 >= 0.0)) throw PreconditionError("gain schedule needs Delta1 >= 0");
  const double eps1 = schedule_eps1(Delta1);
  return PidGains::from_prime(s.a_p + s.b_p * Delta1, s.a_d + s.b_d * Delta1,
                              s.a_i + s.b_i * Delta1, eps1, eps1 / 4.0);
}

GainSchedule load_gain_schedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path + ": cannot open gain schedule");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(path + ": " + e.what());
  }
  const auto& s = j.at("schedule");
  GainSchedule out;
  out.a_d = s.at("a_d").get<double>();
  out.b_d = s.at("b_d").get<double>();
  out.a_p = s.at("a_p").get<double>();
  out.b_p = s.at("b_p").get<double>();
  out.a_i = s.at("a_i").get<double>();
  out.b_i = s.at("b_i").get<double>();
  return out;
}

Vector robot_rhs(const ManipulatorModel& model, const Vector& q, const Vector& qd,
                 const Vector& u) {
  require_dim(q, model.n, "q");
  require_dim(qd, model.n, "q'");
  require_dim(u, model.n, "u");
  const Matrix D = model.D(q);
  Eigen::LLT<Matrix> llt(D);
  if (llt.info() != Eigen::Success) throw ModelError("inertia matrix is not positive definite");
  Vector out(2 * model.n);
  out.head(model.n) = qd;
  out.tail(model.n) = llt.solve(u - model.C(q, qd) * qd - model.g(q));
  return out;
}

Vector pid_torque(const PidGains& gains, const Vector& q, const Vector& qd, const Vector& nu,
                  const Vector& q_star) {
  return -gains.k_p * (q - q_star) - gains.k_d * qd + nu;
}

Vector pid_integrator_rhs(const PidGains& gains, const Vector& q, const Vector& q_star) {
  return -gains.k_i * (q - q_star);
}

Vector voltage_law(const MotorModel& motor, const Vector& i_tilde, const Vector& i_star,
                   const Vector& qd, const Vector& di_star_dt) {
  return -motor.R_prime * i_tilde + motor.R * i_star + motor.k_b * qd + motor.L * di_star_dt;
}

Vector motor_current_rhs(const MotorModel& motor, const Vector& i, const Vector& qd,
                         const Vector& v) {
  return (-motor.R * i - motor.k_b * qd + v) / motor.L;
}

Vector default_gravity_guess(const ManipulatorModel& model, const Vector& q_star,
                             double perturbation, int joint) {
  Vector g = model.g(q_star);
  if (joint >= 0 && joint < model.n) g[joint] *= 1.0 + perturbation;
  return g;
}

}  // namespace uspas
