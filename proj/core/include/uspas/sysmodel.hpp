#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace uspas {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Right-hand side contract (t, x, theta) -> dx/dt, written into `dxdt`
/// (already sized to the system dimension).
using RhsFn = std::function<void(double t, const Vector& x, const Vector& theta, Vector& dxdt)>;

/// x' = f(t, x, theta).
struct ParameterizedSystem {
  int dim = 0;
  int param_dim = 0;
  RhsFn rhs;
  std::optional<double> lipschitz_hint;
  std::string name;

  /// Evaluates the right-hand side, checking dimensions.
  Vector operator()(double t, const Vector& x, const Vector& theta) const;
};

/// Interconnection matrix g(t, x, theta) of size n1 x n2; x and theta are the
/// stacked cascade state and parameters.
using InterconnectionFn =
    std::function<void(double t, const Vector& x, const Vector& theta, Matrix& g)>;

/// x1' = f1(t, x1, theta1) + g(t, x, theta) x2,  x2' = f2(t, x2, theta2).
struct CascadeSystem {
  ParameterizedSystem f1;
  ParameterizedSystem f2;
  InterconnectionFn g;
  std::string name;

  int n1() const { return f1.dim; }
  int n2() const { return f2.dim; }
  Matrix interconnection(double t, const Vector& x, const Vector& theta) const;
};

/// Stacked system of dimension n1 + n2 with theta = (theta1, theta2).
ParameterizedSystem compose_cascade(const CascadeSystem& cascade);

/// Classic fixed-step fourth-order Runge-Kutta.
struct Rk4 {
  double h = 1e-3;
};
/// Dormand-Prince 5(4) with per-step error control.
struct Rk45 {
  double rtol = 1e-8;
  double atol = 1e-10;
};
using Method = std::variant<Rk4, Rk45>;

struct IntegrateOptions {
  Method method = Rk45{};
  /// Largest spacing between recorded states; 0 selects horizon / 400.
  double max_output_step = 0.0;
  /// States with norm above this count as escaped.
  double escape_threshold = 1e8;
  std::size_t max_steps = 50'000'000;
  /// Optional early exit, tested on every recorded state after the first:
  /// integration ends (successfully) once it returns true.
  std::function<bool(double elapsed, const Vector& x)> stop_when;
};

struct IntegratorInfo {
  std::string method;
  double h = 0.0;
  double rtol = 0.0;
  double atol = 0.0;
  std::size_t accepted_steps = 0;
  std::size_t rejected_steps = 0;
};

struct TrajectoryFailure {
  enum class Kind { kNonFinite, kEscape, kStepUnderflow, kStepLimit };
  Kind kind;
  double time;
  std::string message;
};

const char* to_string(TrajectoryFailure::Kind kind);

/// Recorded solution x(t, t0, x0, theta) on an output grid.
struct Trajectory {
  double t0 = 0.0;
  std::vector<double> times;    ///< absolute times, times[0] == t0
  std::vector<double> elapsed;  ///< times[k] - t0, computed without cancellation
  std::vector<Vector> states;
  Vector theta;
  IntegratorInfo info;
  /// Set when integration stopped early; states end at the last valid point.
  std::optional<TrajectoryFailure> failure;
  /// True when IntegrateOptions::stop_when ended the run before the horizon.
  bool stopped = false;

  std::size_t size() const { return times.size(); }
  bool ok() const { return !failure.has_value(); }
  const Vector& initial_state() const { return states.front(); }
  const Vector& final_state() const { return states.back(); }
};

/// Integrates over [t0, t0 + horizon]. Internally the step sequence is driven
/// by elapsed time, so autonomous systems give identical trajectories for any
/// t0. Throws DivergenceError / StiffnessError on failure.
Trajectory integrate(const ParameterizedSystem& sys, double t0, const Vector& x0,
                     const Vector& theta, double horizon, const IntegrateOptions& options = {});

/// Same as integrate() but records failures in Trajectory::failure instead of
/// throwing.
Trajectory integrate_recorded(const ParameterizedSystem& sys, double t0, const Vector& x0,
                              const Vector& theta, double horizon,
                              const IntegrateOptions& options = {});

struct InitialCondition {
  double t0 = 0.0;
  Vector x0;
};

/// Layout of the default radius-shell sampling plan.
struct ShellPlan {
  int directions = 20;
  int radii = 8;
  /// Smallest radius as a fraction of the largest.
  double inner_fraction = 0.01;
  /// Initial times; empty selects {0, T/3, 2T/3, T, 10T}.
  std::vector<double> t0_probes;
};

std::vector<double> default_t0_probes(double horizon);

/// Deterministic source of (t0, x0) pairs.
class InitialConditionSampler {
 public:
  /// Directions x radii x t0 probes. Directions come from a deterministic
  /// sphere grid for n <= 4 and a seeded uniform sphere for n > 4; radii are
  /// geometric from inner_fraction * max_radius to max_radius.
  static InitialConditionSampler shells(int dim, double max_radius, double horizon,
                                        const ShellPlan& plan, std::uint64_t seed);
  /// `count` points uniform in the ball; t0 cycles through `t0_probes`.
  static InitialConditionSampler uniform_ball(int dim, double radius, std::size_t count,
                                              std::vector<double> t0_probes,
                                              std::uint64_t seed);
  /// `count` points uniform on the sphere of the given radius.
  static InitialConditionSampler sphere(int dim, double radius, std::size_t count,
                                        std::vector<double> t0_probes, std::uint64_t seed);
  static InitialConditionSampler from_list(std::vector<InitialCondition> samples);

  const std::vector<InitialCondition>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  /// Distinct initial times in the sample set, ascending.
  std::vector<double> probed_t0() const;

 private:
  explicit InitialConditionSampler(std::vector<InitialCondition> samples)
      : samples_(std::move(samples)) {}
  std::vector<InitialCondition> samples_;
};

/// Unit directions: deterministic for dim <= 4, seeded otherwise.
std::vector<Vector> sphere_directions(int dim, int count, std::uint64_t seed);

/// One trajectory per sample, in sample order. Integration failures are
/// recorded on the trajectory rather than thrown. `threads` = 0 uses the
/// default worker count.
std::vector<Trajectory> ensemble(const ParameterizedSystem& sys,
                                 const InitialConditionSampler& sampler, const Vector& theta,
                                 double horizon, const IntegrateOptions& options = {},
                                 int threads = 0);

/// CSV with header `t,x1,...,xn`, shortest round-trip decimals.
std::string trajectory_csv(const Trajectory& trajectory);

}  // namespace uspas
