#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace uspas {

/// Class of a scalar comparison function.
///
///  K     strictly increasing, f(0) = 0 (bounded or not)
///  Kinf  K and unbounded; a grid K function with positive extrapolation slope
///  L     non-increasing, tending to 0 at infinity
enum class Kind { K, Kinf, L };

const char* to_string(Kind kind);

/// Relative tolerance of numeric inversion.
inline constexpr double kInverseTolerance = 1e-10;
inline constexpr int kInverseMaxIterations = 200;
/// Tie-break added to repeated grid values to keep K grids strictly monotone.
inline constexpr double kStrictEpsilon = 1e-12;
/// Slope that zero envelopes are promoted to so they stay class K.
inline constexpr double kRegularizationEpsilon = 1e-9;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Behaviour of a breakpoint table beyond its last breakpoint.
enum class Extrapolation {
  kNone,  ///< evaluation past the last breakpoint is a DomainError
  kTail,  ///< last-segment slope (K) or exponential tail through the last two points (L)
};

/// A scalar comparison function (class K, K∞ or L).
///
/// Values are immutable. The representation is either a closed form, a
/// strictly monotone breakpoint table, or an exact structural node
/// (composition, inverse, user callable) that keeps evaluation and inversion
/// free of resampling error. An optional additive `offset` turns a K function
/// into the "nondecreasing, f(0) >= 0" functions used for gradient and
/// interconnection bounds.
class ComparisonFunction {
 public:
  /// a * s^p  (linear when p == 1). a == 0 is only legal as a constant().
  struct Power {
    double a;
    double p;
  };
  /// a * (1 - exp(-lambda s)); bounded K.
  struct SaturatingExp {
    double a;
    double lambda;
  };
  /// a * exp(-lambda t) + b; L kind.
  struct ExpDecay {
    double a;
    double lambda;
    double b;
  };
  /// Breakpoint table. Linear interpolation by default; `power_law` grids
  /// interpolate log v against log s (linear on the first segment) and
  /// extrapolate with the last exponent.
  struct Grid {
    std::vector<double> s;
    std::vector<double> v;
    Extrapolation extrapolation = Extrapolation::kTail;
    bool power_law = false;
  };
  /// outer(inner(s)), evaluated and inverted exactly.
  struct Composite {
    std::shared_ptr<const ComparisonFunction> outer;
    std::shared_ptr<const ComparisonFunction> inner;
  };
  /// f^{-1}: evaluation inverts `of`, inversion evaluates it.
  struct Inverse {
    std::shared_ptr<const ComparisonFunction> of;
  };
  /// Arbitrary callable, inverted by bisection.
  struct Custom {
    std::function<double(double)> fn;
    std::string name;
    double supremum = kInfinity;
  };

  using Repr = std::variant<Power, SaturatingExp, ExpDecay, Grid, Composite,
                            Inverse, Custom>;

  // -- closed forms -------------------------------------------------------
  static ComparisonFunction linear(double a);
  static ComparisonFunction power(double a, double p);
  static ComparisonFunction saturating_exp(double a, double lambda);
  static ComparisonFunction exp_decay(double a, double lambda, double b = 0.0);
  /// Constant nondecreasing function s -> c (K kind with offset c and zero base).
  static ComparisonFunction constant(double c);
  static ComparisonFunction identity() { return linear(1.0); }

  /// Breakpoint table. K/Kinf tables must start at (0, 0) and be strictly
  /// increasing in both columns; L tables need s strictly increasing and v
  /// non-increasing and nonnegative. Kinf requires Extrapolation::kTail.
  static ComparisonFunction grid(Kind kind, std::vector<double> s,
                                 std::vector<double> v,
                                 Extrapolation extrapolation = Extrapolation::kTail);

  /// K-infinity table interpolated piecewise as a power law, exact for
  /// a * s^p data. Same layout rules as grid().
  static ComparisonFunction power_law_grid(std::vector<double> s, std::vector<double> v);

  /// Callable representation. For K kinds the callable must be increasing and
  /// vanish at 0; `supremum` is its least upper bound (infinite for Kinf).
  static ComparisonFunction custom(Kind kind, std::function<double(double)> fn,
                                   std::string name, double supremum = kInfinity);

  // -- queries ------------------------------------------------------------
  Kind kind() const noexcept { return kind_; }
  const Repr& repr() const noexcept { return repr_; }
  double offset() const noexcept { return offset_; }
  /// Right end of the domain; +inf unless the function was restricted.
  double domain_max() const noexcept { return domain_max_; }
  bool is_increasing_kind() const noexcept { return kind_ != Kind::L; }
  bool is_unbounded() const noexcept { return kind_ == Kind::Kinf; }

  /// Least upper bound of the function on its domain (offset included).
  double supremum() const;

  /// f(s). Throws DomainError for s < 0 or s beyond a non-extrapolating
  /// domain.
  double operator()(double s) const;
  double eval(double s) const { return (*this)(s); }

  /// s with f(s) = y for K/Kinf functions. Throws KindError for L functions
  /// and RangeError when y lies outside the range.
  double invert(double y) const;

  /// The inverse as a function object (exact for closed forms and grids).
  ComparisonFunction inverse() const;

  /// Same function shifted up by `c` >= 0.
  ComparisonFunction with_offset(double c) const;
  /// Same function with its domain cut at `s_max` (no extrapolation past it).
  ComparisonFunction restricted(double s_max) const;

  /// Breakpoint samples of the function (used for export of non-tabular
  /// representations).
  Grid sample(std::span<const double> nodes) const;

  /// Short human-readable family name ("power", "grid", "composite", ...).
  std::string family() const;

 private:
  friend ComparisonFunction compose(const ComparisonFunction&, const ComparisonFunction&,
                                    std::optional<Kind>);

  ComparisonFunction(Kind kind, Repr repr) : kind_(kind), repr_(std::move(repr)) {}

  double eval_base(double s) const;
  double invert_base(double y) const;
  double bisect(double y) const;

  Kind kind_;
  Repr repr_;
  double offset_ = 0.0;
  double domain_max_ = kInfinity;
};

/// f ∘ g with inferred kind (K∘K = K, K∘L = L, L∘K∞ = L). When `requested`
/// is given it must match the inferred kind (K accepts K∞). Closed forms of
/// compatible families are composed symbolically; everything else becomes an
/// exact Composite node.
ComparisonFunction compose(const ComparisonFunction& f, const ComparisonFunction& g,
                           std::optional<Kind> requested = std::nullopt);

/// Sampled (argument, value) pair fed to envelope fitting.
struct EnvelopeSample {
  double s;
  double value;
};

/// Smallest grid K function dominating every sample: per-abscissa maximum,
/// running maximum from the left, anchored at (0, 0), zero stretches promoted
/// to slope kRegularizationEpsilon and ties broken upwards. Returned kind is
/// Kinf (positive extrapolation slope).
ComparisonFunction fit_K_envelope(std::span<const EnvelopeSample> samples);

/// Non-increasing upper envelope: running maximum from the right. Returned
/// kind is L; callers decide whether the tail is small enough.
ComparisonFunction fit_L_envelope(std::span<const EnvelopeSample> samples);

/// Log-spaced nodes on [lo, hi] preceded by 0. Used when exporting callables.
std::vector<double> export_nodes(double lo, double hi, int count);

}  // namespace uspas
