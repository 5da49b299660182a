#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace uspas {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a function (e.g. negative s, beyond s_max).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Value outside the range of a bounded comparison function.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Comparison-function kind mismatch (K vs L, K∞ required, ...).
class KindError : public Error {
 public:
  using Error::Error;
};

/// An envelope sample at s = 0 with positive value: a class-K witness cannot
/// be anchored at the origin.
class StabilityAtZeroError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Trajectory became non-finite or escaped the divergence threshold. Carries
/// the last valid time and state.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, double last_time,
                  Eigen::VectorXd last_state, bool escaped)
      : Error(what),
        last_time_(last_time),
        last_state_(std::move(last_state)),
        escaped_(escaped) {}

  double last_time() const noexcept { return last_time_; }
  const Eigen::VectorXd& last_state() const noexcept { return last_state_; }
  /// True when the norm threshold was crossed, false for NaN/Inf.
  bool escaped() const noexcept { return escaped_; }

 private:
  double last_time_;
  Eigen::VectorXd last_state_;
  bool escaped_;
};

/// Adaptive step size underflowed.
class StiffnessError : public Error {
 public:
  StiffnessError(const std::string& what, double last_time,
                 Eigen::VectorXd last_state)
      : Error(what), last_time_(last_time), last_state_(std::move(last_state)) {}

  double last_time() const noexcept { return last_time_; }
  const Eigen::VectorXd& last_state() const noexcept { return last_state_; }

 private:
  double last_time_;
  Eigen::VectorXd last_state_;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class RootFindError : public Error {
 public:
  using Error::Error;
};

/// Lyapunov-function transformation failed (quadrature breakdown).
class TransformError : public Error {
 public:
  using Error::Error;
};

/// Synthesized residual ball is not smaller than the domain ball.
class EstimateDegenerateError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

class GainConfigurationError : public Error {
 public:
  using Error::Error;
};

/// A parameter oracle returned a value outside the declared parameter set.
class ParameterSetError : public Error {
 public:
  using Error::Error;
};

/// Scenario file problems. The message starts with the offending field path
/// or line/column.
class ScenarioError : public Error {
 public:
  using Error::Error;
};

}  // namespace uspas
