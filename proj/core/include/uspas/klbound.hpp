#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "uspas/compfn.hpp"

namespace uspas {

/// A two-argument bound beta(s, t): class K in s, class L in t.
class KLBound {
 public:
  /// eta(s) * exp(-rate * (t - shift)).
  struct Product {
    ComparisonFunction eta;
    double rate;
    double shift;
  };
  /// min{eta(s), sigma(t)} + eps * min(s, 1) * exp(-t).
  struct MinEnvelope {
    ComparisonFunction eta;
    ComparisonFunction sigma;
    double eps;
  };
  struct Max {
    std::vector<std::shared_ptr<const KLBound>> parts;
  };
  struct Min {
    std::vector<std::shared_ptr<const KLBound>> parts;
  };
  /// Bilinear table over (s, t); values row-major with s as the row index.
  /// Linear extrapolation in s from the last segment, held constant in t.
  struct GridSurface {
    std::vector<double> s;
    std::vector<double> t;
    std::vector<double> values;
  };
  struct Custom {
    std::function<double(double, double)> fn;
    std::string name;
  };

  using Repr = std::variant<Product, MinEnvelope, Max, Min, GridSurface, Custom>;

  static KLBound product(ComparisonFunction eta, double rate, double shift = 0.0);
  static KLBound min_envelope(ComparisonFunction eta, ComparisonFunction sigma,
                              double eps = kRegularizationEpsilon);
  static KLBound max_of(std::vector<KLBound> parts);
  static KLBound min_of(std::vector<KLBound> parts);
  static KLBound grid(std::vector<double> s, std::vector<double> t,
                      std::vector<double> values);
  static KLBound custom(std::function<double(double, double)> fn, std::string name);

  double operator()(double s, double t) const;

  const Repr& repr() const noexcept { return repr_; }
  std::string family() const;

  /// Table of values on the given nodes (row-major, s rows).
  GridSurface sample(std::span<const double> s_nodes, std::span<const double> t_nodes) const;

 private:
  explicit KLBound(Repr repr) : repr_(std::move(repr)) {}
  Repr repr_;
};

/// Result of the class-KL monotonicity audit on a finite (s, t) grid.
struct KLInvariantReport {
  bool zero_at_origin = true;    ///< beta(0, t) == 0 for every probed t
  bool increasing_in_s = true;   ///< nondecreasing along every s row
  bool decreasing_in_t = true;   ///< non-increasing along every t column
  bool tail_small = true;        ///< beta(s, t_last) <= tail_tol for every s
  double worst_s_violation = 0.0;
  double worst_t_violation = 0.0;

  bool ok() const { return zero_at_origin && increasing_in_s && decreasing_in_t && tail_small; }
};

KLInvariantReport check_kl_invariants(const KLBound& beta, std::span<const double> s_nodes,
                                      std::span<const double> t_nodes,
                                      double tail_tol = kInfinity);

/// KL bound built from uniform-stability and uniform-attractivity witnesses:
/// beta(s, t) = min{eta(s), sigma(t)} + eps_reg * min(s, 1) * exp(-t).
KLBound kl_from_US_UA(const ComparisonFunction& eta, const ComparisonFunction& sigma);

}  // namespace uspas
