#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uspas/compfn.hpp"
#include "uspas/klbound.hpp"
#include "uspas/sysmodel.hpp"

namespace uspas {

/// Inner ball B_delta and outer ball B_Delta, Delta > delta >= 0. Delta may be
/// +inf (global check); samplers then need their own finite probe radius.
struct BallPair {
  double delta = 0.0;
  double Delta = 1.0;

  void validate() const;
};

/// Distance from x to the closed ball B_delta: max(|x| - delta, 0).
double set_distance(const Vector& x, double delta);

enum class Property { US, UA, UAS, UB, USPAS };
const char* to_string(Property p);

struct Counterexample {
  double t0 = 0.0;
  Vector x0;
  double t = 0.0;       ///< absolute time of the violation
  double margin = 0.0;  ///< amount by which the bound is exceeded
  std::string reason;
};

/// One row of a USPAS schedule.
struct ScheduleEntry {
  BallPair balls;
  Vector theta;
  bool holds = false;
};

/// Empirical verdict. holds == true means "not falsified on the samples and a
/// witness dominating every sampled point was fitted", never a proof.
struct StabilityVerdict {
  Property property = Property::UAS;
  bool holds = false;
  std::string note;

  // confidence metadata
  std::size_t samples = 0;
  std::size_t failed_integrations = 0;
  std::optional<std::uint64_t> seed;
  std::vector<double> probed_t0;
  BallPair balls;
  double tail_tol = 0.0;

  // witnesses
  std::optional<ComparisonFunction> eta;
  std::optional<ComparisonFunction> sigma;
  std::optional<KLBound> beta;
  std::optional<ComparisonFunction> gamma;
  std::optional<double> mu;

  std::optional<Counterexample> counterexample;
  /// Bound-validation runs: number of violating points and the largest
  /// (bound exceeded by) margin, negative when every point is dominated.
  std::size_t violations = 0;
  double worst_margin = -kInfinity;

  // raw envelope data: (|x0|, sup_t |x|_delta) and (t - t0, max |x|_delta)
  std::vector<EnvelopeSample> us_data;
  std::vector<EnvelopeSample> ua_data;

  std::vector<ScheduleEntry> schedule;
};

struct CheckOptions {
  IntegrateOptions integrate;
  /// UA tail tolerance; NaN selects 1e-3 * Delta (or of the largest sampled
  /// radius when Delta is infinite).
  double tail_tol = std::numeric_limits<double>::quiet_NaN();
  int threads = 0;
  std::optional<std::uint64_t> seed;
};

// -- evaluation on stored trajectories (no integration) -------------------

StabilityVerdict evaluate_US(std::span<const Trajectory> trajectories, const BallPair& balls,
                             double escape_threshold = 1e8);
StabilityVerdict evaluate_UA(std::span<const Trajectory> trajectories, const BallPair& balls,
                             double horizon, double tail_tol);
/// US and UA combined; the KL witness is checked against every sampled point.
StabilityVerdict evaluate_UAS(std::span<const Trajectory> trajectories, const BallPair& balls,
                              double horizon, double tail_tol, double escape_threshold = 1e8);
StabilityVerdict evaluate_UB(std::span<const Trajectory> trajectories, double radius);

// -- integrate, then evaluate ---------------------------------------------

StabilityVerdict check_US(const ParameterizedSystem& sys, const Vector& theta,
                          const BallPair& balls, const InitialConditionSampler& sampler,
                          double horizon, const CheckOptions& options = {});
StabilityVerdict check_UA(const ParameterizedSystem& sys, const Vector& theta,
                          const BallPair& balls, const InitialConditionSampler& sampler,
                          double horizon, const CheckOptions& options = {});
StabilityVerdict check_UAS(const ParameterizedSystem& sys, const Vector& theta,
                           const BallPair& balls, const InitialConditionSampler& sampler,
                           double horizon, const CheckOptions& options = {});
StabilityVerdict check_UB(const ParameterizedSystem& sys, const Vector& theta, double radius,
                          const InitialConditionSampler& sampler, double horizon,
                          const CheckOptions& options = {});

struct DsetEntry {
  Vector theta;
  StabilityVerdict verdict;
};

struct DsetEstimate {
  std::vector<DsetEntry> entries;  ///< every probed theta, in grid order
  std::vector<Vector> passing;     ///< inner approximation of the D-set on the grid
};

DsetEstimate estimate_dset(const ParameterizedSystem& sys, const BallPair& balls,
                           const std::vector<Vector>& param_grid,
                           const InitialConditionSampler& sampler, double horizon,
                           const CheckOptions& options = {});

/// (delta, Delta) -> theta*.
using ParameterOracle = std::function<Vector(const BallPair&)>;
/// Membership test for the declared parameter set; empty accepts everything.
using ParameterSet = std::function<bool(const Vector&)>;
/// Sampler for a given ball pair.
using SamplerFactory = std::function<InitialConditionSampler(const BallPair&)>;

/// Runs check_UAS for every pair of the schedule with the oracle's theta.
/// Throws ParameterSetError when the oracle leaves the parameter set.
StabilityVerdict check_USPAS(const ParameterizedSystem& sys, const ParameterOracle& oracle,
                             const std::vector<BallPair>& schedule,
                             const SamplerFactory& sampler, double horizon,
                             const CheckOptions& options = {},
                             const ParameterSet& parameter_set = {});

}  // namespace uspas
