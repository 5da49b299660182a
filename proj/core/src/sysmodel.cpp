#include "uspas/sysmodel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "uspas/errors.hpp"
#include "numfmt.hpp"
#include "uspas/parallel.hpp"

namespace uspas {

Vector ParameterizedSystem::operator()(double t, const Vector& x, const Vector& theta) const {
  if (x.size() != dim)
    throw DimensionError(name + ": state has dimension " + std::to_string(x.size()) +
                         ", expected " + std::to_string(dim));
  if (theta.size() != param_dim)
    throw DimensionError(name + ": parameter has dimension " + std::to_string(theta.size()) +
                         ", expected " + std::to_string(param_dim));
  Vector dx = Vector::Zero(dim);
  rhs(t, x, theta, dx);
  return dx;
}

Matrix CascadeSystem::interconnection(double t, const Vector& x, const Vector& theta) const {
  Matrix g = Matrix::Zero(n1(), n2());
  if (this->g) this->g(t, x, theta, g);
  return g;
}

ParameterizedSystem compose_cascade(const CascadeSystem& cascade) {
  const int n1 = cascade.f1.dim;
  const int n2 = cascade.f2.dim;
  const int m1 = cascade.f1.param_dim;
  const int m2 = cascade.f2.param_dim;
  if (n1 <= 0 || n2 <= 0) throw DimensionError("cascade subsystems need positive dimensions");
  if (!cascade.f1.rhs || !cascade.f2.rhs) throw DimensionError("cascade subsystem without rhs");

  ParameterizedSystem stacked;
  stacked.dim = n1 + n2;
  stacked.param_dim = m1 + m2;
  stacked.name = cascade.name.empty() ? cascade.f1.name + "+" + cascade.f2.name : cascade.name;
  stacked.rhs = [cascade, n1, n2, m1, m2](double t, const Vector& x, const Vector& theta,
                                          Vector& dx) {
    Vector dx1 = Vector::Zero(n1);
    Vector dx2 = Vector::Zero(n2);
    const Vector x1 = x.head(n1);
    const Vector x2 = x.tail(n2);
    cascade.f1.rhs(t, x1, theta.head(m1), dx1);
    cascade.f2.rhs(t, x2, theta.tail(m2), dx2);
    if (cascade.g) {
      Matrix g = Matrix::Zero(n1, n2);
      cascade.g(t, x, theta, g);
      dx1.noalias() += g * x2;
    }
    dx.head(n1) = dx1;
    dx.tail(n2) = dx2;
  };
  return stacked;
}

const char* to_string(TrajectoryFailure::Kind kind) {
  switch (kind) {
    case TrajectoryFailure::Kind::kNonFinite:
      return "non-finite";
    case TrajectoryFailure::Kind::kEscape:
      return "escape";
    case TrajectoryFailure::Kind::kStepUnderflow:
      return "step-underflow";
    case TrajectoryFailure::Kind::kStepLimit:
      return "step-limit";
  }
  return "?";
}

namespace {

struct Stop {
  TrajectoryFailure failure;
  Vector last_state;
};

class Recorder {
 public:
  Recorder(Trajectory& traj, double t0) : traj_(traj), t0_(t0) {}
  void record(double elapsed, const Vector& x) {
    traj_.elapsed.push_back(elapsed);
    traj_.times.push_back(t0_ + elapsed);
    traj_.states.push_back(x);
  }

 private:
  Trajectory& traj_;
  double t0_;
};

bool finite(const Vector& v) { return v.allFinite(); }

std::optional<Stop> check_state(double t, const Vector& x, const Vector& previous,
                                double escape) {
  if (!finite(x)) {
    return Stop{{TrajectoryFailure::Kind::kNonFinite, t, "state became non-finite"}, previous};
  }
  if (x.norm() > escape) {
    std::ostringstream msg;
    msg << "state norm exceeded escape threshold " << escape;
    return Stop{{TrajectoryFailure::Kind::kEscape, t, msg.str()}, x};
  }
  return std::nullopt;
}

// Output grid: n intervals of equal length no longer than max_output_step.
std::size_t output_intervals(double horizon, double max_output_step) {
  const double step = max_output_step > 0.0 ? max_output_step : horizon / 400.0;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(horizon / step - 1e-9)));
}

std::optional<Stop> run_rk4(const ParameterizedSystem& sys, double t0, const Vector& x0,
                            const Vector& theta, double horizon, const Rk4& method,
                            const IntegrateOptions& options, Trajectory& traj) {
  if (!(method.h > 0.0)) throw PreconditionError("RK4 step must be positive");
  const auto steps =
      static_cast<std::size_t>(std::max(1.0, std::ceil(horizon / method.h - 1e-9)));
  if (steps > options.max_steps) throw PreconditionError("RK4 step count exceeds max_steps");
  const double h = horizon / static_cast<double>(steps);
  const double out_step = options.max_output_step > 0.0 ? options.max_output_step
                                                        : horizon / 400.0;
  const auto stride = std::max<std::size_t>(1, static_cast<std::size_t>(out_step / h + 1e-9));
  traj.info.method = "rk4";
  traj.info.h = h;

  Recorder rec(traj, t0);
  const int n = sys.dim;
  Vector x = x0;
  Vector k1(n), k2(n), k3(n), k4(n), tmp(n);
  rec.record(0.0, x);
  for (std::size_t i = 0; i < steps; ++i) {
    const double tau = h * static_cast<double>(i);
    const double t = t0 + tau;
    k1.setZero();
    sys.rhs(t, x, theta, k1);
    tmp = x + 0.5 * h * k1;
    k2.setZero();
    sys.rhs(t + 0.5 * h, tmp, theta, k2);
    tmp = x + 0.5 * h * k2;
    k3.setZero();
    sys.rhs(t + 0.5 * h, tmp, theta, k3);
    tmp = x + h * k3;
    k4.setZero();
    sys.rhs(t + h, tmp, theta, k4);
    Vector next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double tau_next = (i + 1 == steps) ? horizon : h * static_cast<double>(i + 1);
    if (auto stop = check_state(t0 + tau_next, next, x, options.escape_threshold)) {
      if (stop->failure.kind == TrajectoryFailure::Kind::kEscape) rec.record(tau_next, next);
      return stop;
    }
    x = std::move(next);
    ++traj.info.accepted_steps;
    if ((i + 1) % stride == 0 || i + 1 == steps) {
      rec.record(tau_next, x);
      if (options.stop_when && options.stop_when(tau_next, x)) {
        traj.stopped = i + 1 < steps;
        return std::nullopt;
      }
    }
  }
  return std::nullopt;
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

double error_norm(const Vector& err, const Vector& x, const Vector& y, const Rk45& tol) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double scale = tol.atol + tol.rtol * std::max(std::abs(x[i]), std::abs(y[i]));
    const double r = err[i] / scale;
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(err.size()));
}

double initial_step(const ParameterizedSystem& sys, double t0, const Vector& x0,
                    const Vector& theta, const Vector& f0, const Rk45& tol, double horizon) {
  Vector scale = (tol.atol + tol.rtol * x0.array().abs()).matrix();
  const double n = static_cast<double>(x0.size());
  const double d0 = std::sqrt((x0.array() / scale.array()).square().sum() / n);
  const double d1 = std::sqrt((f0.array() / scale.array()).square().sum() / n);
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, horizon);
  Vector x1 = x0 + h0 * f0;
  Vector f1 = Vector::Zero(x0.size());
  sys.rhs(t0 + h0, x1, theta, f1);
  if (!finite(f1)) return h0 * 1e-3;
  const double d2 =
      std::sqrt(((f1 - f0).array() / scale.array()).square().sum() / n) / h0;
  const double dmax = std::max(d1, d2);
  const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dmax, 0.2);
  return std::min({100.0 * h0, h1, horizon});
}

std::optional<Stop> run_rk45(const ParameterizedSystem& sys, double t0, const Vector& x0,
                             const Vector& theta, double horizon, const Rk45& tol,
                             const IntegrateOptions& options, Trajectory& traj) {
  if (!(tol.rtol > 0.0) || !(tol.atol > 0.0))
    throw PreconditionError("RK45 tolerances must be positive");
  traj.info.method = "rk45";
  traj.info.rtol = tol.rtol;
  traj.info.atol = tol.atol;

  const int n = sys.dim;
  const std::size_t intervals = output_intervals(horizon, options.max_output_step);
  const double out_step = horizon / static_cast<double>(intervals);

  Recorder rec(traj, t0);
  Vector x = x0;
  Vector k1 = Vector::Zero(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), err(n);
  sys.rhs(t0, x, theta, k1);
  if (!finite(k1)) {
    return Stop{{TrajectoryFailure::Kind::kNonFinite, t0, "rhs non-finite at initial state"}, x};
  }
  rec.record(0.0, x);

  double tau = 0.0;
  double h = initial_step(sys, t0, x0, theta, k1, tol, horizon);
  std::size_t steps = 0;
  for (std::size_t k = 1; k <= intervals; ++k) {
    const double target = (k == intervals) ? horizon : out_step * static_cast<double>(k);
    while (tau < target) {
      if (++steps > options.max_steps) {
        return Stop{{TrajectoryFailure::Kind::kStepLimit, t0 + tau, "step limit reached"}, x};
      }
      const double h_min = 16.0 * std::numeric_limits<double>::epsilon() *
                           std::max(1.0, std::abs(t0 + tau));
      if (h < h_min) {
        const bool diverging = !finite(x) || !finite(k1);
        if (diverging)
          return Stop{{TrajectoryFailure::Kind::kNonFinite, t0 + tau, "rhs non-finite"}, x};
        return Stop{{TrajectoryFailure::Kind::kStepUnderflow, t0 + tau,
                     "step size underflow (stiff or singular system)"},
                    x};
      }
      const bool clamped = tau + h >= target;
      const double h_proposed = h;
      const double step = clamped ? target - tau : h;
      const double t = t0 + tau;

      tmp = x + step * (a21 * k1);
      k2.setZero();
      sys.rhs(t + c2 * step, tmp, theta, k2);
      tmp = x + step * (a31 * k1 + a32 * k2);
      k3.setZero();
      sys.rhs(t + c3 * step, tmp, theta, k3);
      tmp = x + step * (a41 * k1 + a42 * k2 + a43 * k3);
      k4.setZero();
      sys.rhs(t + c4 * step, tmp, theta, k4);
      tmp = x + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      k5.setZero();
      sys.rhs(t + c5 * step, tmp, theta, k5);
      tmp = x + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      k6.setZero();
      sys.rhs(t + step, tmp, theta, k6);
      Vector next = x + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      k7.setZero();
      const double tau_next = clamped ? target : tau + step;
      sys.rhs(t0 + tau_next, next, theta, k7);
      err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      const double e = error_norm(err, x, next, tol);
      if (!std::isfinite(e) || !finite(next) || !finite(k7)) {
        ++traj.info.rejected_steps;
        h = 0.25 * step;
        continue;
      }
      if (e > 1.0) {
        ++traj.info.rejected_steps;
        h = step * std::max(0.2, 0.9 * std::pow(e, -0.2));
        continue;
      }
      if (auto stop = check_state(t0 + tau_next, next, x, options.escape_threshold)) {
        if (stop->failure.kind == TrajectoryFailure::Kind::kEscape) rec.record(tau_next, next);
        return stop;
      }
      ++traj.info.accepted_steps;
      const double grow = e == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(e, -0.2));
      h = clamped ? std::max(h_proposed, step * grow) : step * grow;
      tau = tau_next;
      x = std::move(next);
      std::swap(k1, k7);
    }
    rec.record(tau, x);
    if (options.stop_when && options.stop_when(tau, x)) {
      traj.stopped = k < intervals;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

Trajectory run(const ParameterizedSystem& sys, double t0, const Vector& x0,
               const Vector& theta, double horizon, const IntegrateOptions& options,
               std::optional<Stop>& stop) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw PreconditionError("integration horizon must be positive and finite");
  if (!std::isfinite(t0)) throw PreconditionError("initial time must be finite");
  if (x0.size() != sys.dim)
    throw DimensionError(sys.name + ": initial state has dimension " +
                         std::to_string(x0.size()) + ", expected " + std::to_string(sys.dim));
  if (theta.size() != sys.param_dim)
    throw DimensionError(sys.name + ": parameter has dimension " +
                         std::to_string(theta.size()) + ", expected " +
                         std::to_string(sys.param_dim));
  if (!sys.rhs) throw PreconditionError("system without right-hand side");

  Trajectory traj;
  traj.t0 = t0;
  traj.theta = theta;
  if (const auto* rk4 = std::get_if<Rk4>(&options.method)) {
    stop = run_rk4(sys, t0, x0, theta, horizon, *rk4, options, traj);
  } else {
    stop = run_rk45(sys, t0, x0, theta, horizon, std::get<Rk45>(options.method), options, traj);
  }
  if (stop) traj.failure = stop->failure;
  if (traj.states.empty()) {
    traj.elapsed.push_back(0.0);
    traj.times.push_back(t0);
    traj.states.push_back(x0);
  }
  return traj;
}

}  // namespace

Trajectory integrate(const ParameterizedSystem& sys, double t0, const Vector& x0,
                     const Vector& theta, double horizon, const IntegrateOptions& options) {
  std::optional<Stop> stop;
  Trajectory traj = run(sys, t0, x0, theta, horizon, options, stop);
  if (stop) {
    const auto& f = stop->failure;
    const std::string msg = sys.name + ": " + f.message + " at t=" + std::to_string(f.time);
    if (f.kind == TrajectoryFailure::Kind::kStepUnderflow ||
        f.kind == TrajectoryFailure::Kind::kStepLimit)
      throw StiffnessError(msg, f.time, stop->last_state);
    throw DivergenceError(msg, f.time, stop->last_state,
                          f.kind == TrajectoryFailure::Kind::kEscape);
  }
  return traj;
}

Trajectory integrate_recorded(const ParameterizedSystem& sys, double t0, const Vector& x0,
                              const Vector& theta, double horizon,
                              const IntegrateOptions& options) {
  std::optional<Stop> stop;
  return run(sys, t0, x0, theta, horizon, options, stop);
}

std::vector<Trajectory> ensemble(const ParameterizedSystem& sys,
                                 const InitialConditionSampler& sampler, const Vector& theta,
                                 double horizon, const IntegrateOptions& options, int threads) {
  const auto& samples = sampler.samples();
  std::vector<Trajectory> out(samples.size());
  parallel_for(
      samples.size(),
      [&](std::size_t i) {
        out[i] = integrate_recorded(sys, samples[i].t0, samples[i].x0, theta, horizon, options);
      },
      threads);
  return out;
}

std::string trajectory_csv(const Trajectory& trajectory) {
  std::string out = "t";
  const auto n = trajectory.states.empty() ? 0 : trajectory.states.front().size();
  for (Eigen::Index i = 0; i < n; ++i) out += ",x" + std::to_string(i + 1);
  out += '\n';
  for (std::size_t k = 0; k < trajectory.times.size(); ++k) {
    detail::append_number(out, trajectory.times[k]);
    for (Eigen::Index i = 0; i < n; ++i) {
      out += ',';
      detail::append_number(out, trajectory.states[k][i]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace uspas
