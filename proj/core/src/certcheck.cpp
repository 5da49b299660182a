#include "uspas/certcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "uspas/errors.hpp"

namespace uspas {
namespace {

// Sampled radii are r * unit-vector, so allow rounding at the outer sphere.
bool inside(const Vector& x0, double radius) {
  return x0.norm() <= radius * (1.0 + 1e-9);
}

Counterexample failure_counterexample(const Trajectory& traj) {
  Counterexample cx;
  cx.t0 = traj.t0;
  cx.x0 = traj.initial_state();
  cx.t = traj.failure->time;
  cx.margin = kInfinity;
  cx.reason = std::string("integration failed (") + to_string(traj.failure->kind) +
              "): " + traj.failure->message;
  return cx;
}

void fill_metadata(StabilityVerdict& v, std::span<const Trajectory> trajectories,
                   const BallPair& balls) {
  v.balls = balls;
  std::vector<double> t0s;
  for (const auto& tr : trajectories) {
    t0s.push_back(tr.t0);
    if (!tr.ok()) ++v.failed_integrations;
  }
  std::sort(t0s.begin(), t0s.end());
  t0s.erase(std::unique(t0s.begin(), t0s.end()), t0s.end());
  v.probed_t0 = std::move(t0s);
}

double resolve_tail_tol(const CheckOptions& options, const BallPair& balls,
                        const InitialConditionSampler& sampler) {
  if (!std::isnan(options.tail_tol)) return options.tail_tol;
  if (std::isfinite(balls.Delta)) return 1e-3 * balls.Delta;
  double r = 0.0;
  for (const auto& s : sampler.samples()) r = std::max(r, s.x0.norm());
  return 1e-3 * r;
}

std::vector<Trajectory> run_ensemble(const ParameterizedSystem& sys, const Vector& theta,
                                     const InitialConditionSampler& sampler, double horizon,
                                     const CheckOptions& options) {
  return ensemble(sys, sampler, theta, horizon, options.integrate, options.threads);
}

}  // namespace

void BallPair::validate() const {
  if (!(delta >= 0.0) || !std::isfinite(delta))
    throw PreconditionError("ball pair needs a finite delta >= 0");
  if (!(Delta > delta))
    throw PreconditionError("ball pair needs Delta > delta");
}

double set_distance(const Vector& x, double delta) {
  if (!(delta >= 0.0)) throw DomainError("set distance needs delta >= 0");
  return std::max(x.norm() - delta, 0.0);
}

const char* to_string(Property p) {
  switch (p) {
    case Property::US:
      return "US";
    case Property::UA:
      return "UA";
    case Property::UAS:
      return "UAS";
    case Property::UB:
      return "UB";
    case Property::USPAS:
      return "USPAS";
  }
  return "?";
}

StabilityVerdict evaluate_US(std::span<const Trajectory> trajectories, const BallPair& balls,
                             double escape_threshold) {
  balls.validate();
  StabilityVerdict v;
  v.property = Property::US;
  fill_metadata(v, trajectories, balls);

  struct Row {
    const Trajectory* traj;
    double r;
    double sup;
    double t_sup;
  };
  std::vector<Row> rows;
  for (const auto& tr : trajectories) {
    if (!inside(tr.initial_state(), balls.Delta)) continue;
    ++v.samples;
    if (!tr.ok()) {
      if (!v.counterexample) v.counterexample = failure_counterexample(tr);
      continue;
    }
    Row row{&tr, tr.initial_state().norm(), 0.0, tr.t0};
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const double d = set_distance(tr.states[k], balls.delta);
      if (d > row.sup) {
        row.sup = d;
        row.t_sup = tr.times[k];
      }
    }
    if (row.sup > escape_threshold && !v.counterexample) {
      v.counterexample = Counterexample{tr.t0, tr.initial_state(), row.t_sup,
                                        row.sup - escape_threshold, "escape threshold exceeded"};
    }
    rows.push_back(row);
    v.us_data.push_back({row.r, row.sup});
  }
  if (v.counterexample) {
    v.holds = false;
    v.note = "falsified: " + v.counterexample->reason;
    return v;
  }
  if (rows.empty()) {
    v.holds = false;
    v.note = "no samples inside B_Delta";
    return v;
  }

  try {
    v.eta = fit_K_envelope(v.us_data);
  } catch (const StabilityAtZeroError& e) {
    const auto& bad = *std::max_element(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      return (a.r == 0.0 ? a.sup : -1.0) < (b.r == 0.0 ? b.sup : -1.0);
    });
    v.holds = false;
    v.counterexample = Counterexample{bad.traj->t0, bad.traj->initial_state(), bad.t_sup,
                                      bad.sup, "trajectory leaves B_delta from the origin"};
    v.note = std::string("falsified: ") + e.what();
    return v;
  }

  // Anchoring: the envelope at the smallest sampled radius must be of the order
  // of that radius, otherwise eta cannot vanish at 0.
  double r_min = kInfinity;
  for (const auto& row : rows)
    if (row.r > 0.0) r_min = std::min(r_min, row.r);
  if (std::isfinite(r_min)) {
    const double allowed = 3.0 * r_min + balls.delta;
    const double at_min = (*v.eta)(r_min);
    if (at_min > allowed) {
      const Row* worst = nullptr;
      for (const auto& row : rows)
        if (row.r <= r_min && (!worst || row.sup > worst->sup)) worst = &row;
      v.holds = false;
      v.counterexample = Counterexample{worst->traj->t0, worst->traj->initial_state(),
                                        worst->t_sup, at_min - allowed,
                                        "envelope does not vanish at the origin"};
      v.note = "inconclusive-unstable: eta(r_min) exceeds 3 r_min + delta";
      return v;
    }
  }
  v.holds = true;
  return v;
}

StabilityVerdict evaluate_UA(std::span<const Trajectory> trajectories, const BallPair& balls,
                             double horizon, double tail_tol) {
  balls.validate();
  StabilityVerdict v;
  v.property = Property::UA;
  v.tail_tol = tail_tol;
  fill_metadata(v, trajectories, balls);

  std::map<double, double> pooled;
  const Trajectory* worst = nullptr;
  double worst_final = -1.0;
  for (const auto& tr : trajectories) {
    if (!inside(tr.initial_state(), balls.Delta)) continue;
    ++v.samples;
    if (!tr.ok()) {
      if (!v.counterexample) v.counterexample = failure_counterexample(tr);
      continue;
    }
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const double d = set_distance(tr.states[k], balls.delta);
      auto [it, fresh] = pooled.emplace(tr.elapsed[k], d);
      if (!fresh) it->second = std::max(it->second, d);
    }
    const double final_d = set_distance(tr.final_state(), balls.delta);
    if (final_d > worst_final) {
      worst_final = final_d;
      worst = &tr;
    }
  }
  if (v.counterexample) {
    v.holds = false;
    v.note = "falsified: " + v.counterexample->reason;
    return v;
  }
  if (pooled.empty()) {
    v.holds = false;
    v.note = "no samples inside B_Delta";
    return v;
  }
  for (const auto& [t, d] : pooled) v.ua_data.push_back({t, d});
  v.sigma = fit_L_envelope(v.ua_data);
  const double tail = (*v.sigma)(horizon);
  v.holds = tail <= tail_tol;
  if (!v.holds) {
    v.counterexample = Counterexample{worst->t0, worst->initial_state(), worst->times.back(),
                                      worst_final - tail_tol,
                                      "distance to B_delta above tail tolerance at the horizon"};
    std::ostringstream msg;
    msg << "falsified: envelope tail " << tail << " > tail_tol " << tail_tol;
    v.note = msg.str();
  }
  return v;
}

StabilityVerdict evaluate_UAS(std::span<const Trajectory> trajectories, const BallPair& balls,
                              double horizon, double tail_tol, double escape_threshold) {
  StabilityVerdict us = evaluate_US(trajectories, balls, escape_threshold);
  StabilityVerdict ua = evaluate_UA(trajectories, balls, horizon, tail_tol);

  StabilityVerdict v;
  v.property = Property::UAS;
  v.tail_tol = tail_tol;
  fill_metadata(v, trajectories, balls);
  v.samples = us.samples;
  v.eta = us.eta;
  v.sigma = ua.sigma;
  v.us_data = std::move(us.us_data);
  v.ua_data = std::move(ua.ua_data);
  if (!us.holds || !ua.holds) {
    v.holds = false;
    v.counterexample = !us.holds ? us.counterexample : ua.counterexample;
    v.note = !us.holds ? "US " + us.note : "UA " + ua.note;
    return v;
  }

  v.beta = kl_from_US_UA(*v.eta, *v.sigma);
  for (const auto& tr : trajectories) {
    if (!inside(tr.initial_state(), balls.Delta)) continue;
    const double r = tr.initial_state().norm();
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const double d = set_distance(tr.states[k], balls.delta);
      const double b = (*v.beta)(r, tr.elapsed[k]);
      if (d > b) {
        v.holds = false;
        v.counterexample =
            Counterexample{tr.t0, tr.initial_state(), tr.times[k], d - b, "KL witness violated"};
        v.note = "KL witness does not dominate the samples";
        return v;
      }
    }
  }
  v.holds = true;
  return v;
}

StabilityVerdict evaluate_UB(std::span<const Trajectory> trajectories, double radius) {
  if (!(radius > 0.0)) throw PreconditionError("UB radius must be positive");
  StabilityVerdict v;
  v.property = Property::UB;
  fill_metadata(v, trajectories, BallPair{0.0, radius});

  struct Row {
    double r;
    double sup;
  };
  std::vector<Row> rows;
  for (const auto& tr : trajectories) {
    if (!inside(tr.initial_state(), radius)) continue;
    ++v.samples;
    if (!tr.ok()) {
      if (!v.counterexample) v.counterexample = failure_counterexample(tr);
      continue;
    }
    double sup = 0.0;
    for (const auto& x : tr.states) sup = std::max(sup, x.norm());
    rows.push_back({tr.initial_state().norm(), sup});
  }
  if (v.counterexample) {
    v.holds = false;
    v.note = "falsified: " + v.counterexample->reason;
    return v;
  }
  if (rows.empty()) {
    v.holds = false;
    v.note = "no samples inside the ball";
    return v;
  }
  double r_min = kInfinity;
  for (const auto& row : rows) r_min = std::min(r_min, row.r);
  double m_min = 0.0;
  for (const auto& row : rows)
    if (row.r == r_min) m_min = std::max(m_min, row.sup);
  const double mu = std::max(0.0, m_min - r_min);
  for (const auto& row : rows) v.us_data.push_back({row.r, std::max(row.sup - mu, 0.0)});
  v.mu = mu;
  v.gamma = fit_K_envelope(v.us_data);
  v.holds = true;
  return v;
}

StabilityVerdict check_US(const ParameterizedSystem& sys, const Vector& theta,
                          const BallPair& balls, const InitialConditionSampler& sampler,
                          double horizon, const CheckOptions& options) {
  const auto trajs = run_ensemble(sys, theta, sampler, horizon, options);
  auto v = evaluate_US(trajs, balls, options.integrate.escape_threshold);
  v.seed = options.seed;
  return v;
}

StabilityVerdict check_UA(const ParameterizedSystem& sys, const Vector& theta,
                          const BallPair& balls, const InitialConditionSampler& sampler,
                          double horizon, const CheckOptions& options) {
  const auto trajs = run_ensemble(sys, theta, sampler, horizon, options);
  auto v = evaluate_UA(trajs, balls, horizon, resolve_tail_tol(options, balls, sampler));
  v.seed = options.seed;
  return v;
}

StabilityVerdict check_UAS(const ParameterizedSystem& sys, const Vector& theta,
                           const BallPair& balls, const InitialConditionSampler& sampler,
                           double horizon, const CheckOptions& options) {
  const auto trajs = run_ensemble(sys, theta, sampler, horizon, options);
  auto v = evaluate_UAS(trajs, balls, horizon, resolve_tail_tol(options, balls, sampler),
                        options.integrate.escape_threshold);
  v.seed = options.seed;
  return v;
}

StabilityVerdict check_UB(const ParameterizedSystem& sys, const Vector& theta, double radius,
                          const InitialConditionSampler& sampler, double horizon,
                          const CheckOptions& options) {
  const auto trajs = run_ensemble(sys, theta, sampler, horizon, options);
  auto v = evaluate_UB(trajs, radius);
  v.seed = options.seed;
  return v;
}

DsetEstimate estimate_dset(const ParameterizedSystem& sys, const BallPair& balls,
                           const std::vector<Vector>& param_grid,
                           const InitialConditionSampler& sampler, double horizon,
                           const CheckOptions& options) {
  if (param_grid.empty()) throw PreconditionError("D-set estimate needs a nonempty grid");
  DsetEstimate out;
  for (const auto& theta : param_grid) {
    auto verdict = check_UAS(sys, theta, balls, sampler, horizon, options);
    if (verdict.holds) out.passing.push_back(theta);
    out.entries.push_back({theta, std::move(verdict)});
  }
  return out;
}

StabilityVerdict check_USPAS(const ParameterizedSystem& sys, const ParameterOracle& oracle,
                             const std::vector<BallPair>& schedule,
                             const SamplerFactory& sampler, double horizon,
                             const CheckOptions& options, const ParameterSet& parameter_set) {
  if (schedule.empty()) throw PreconditionError("USPAS schedule is empty");
  StabilityVerdict v;
  v.property = Property::USPAS;
  v.seed = options.seed;
  v.holds = true;
  std::vector<double> t0s;
  for (const auto& balls : schedule) {
    balls.validate();
    Vector theta = oracle(balls);
    if (parameter_set && !parameter_set(theta)) {
      std::ostringstream msg;
      msg << "oracle returned a parameter outside the declared set for delta=" << balls.delta
          << ", Delta=" << balls.Delta;
      throw ParameterSetError(msg.str());
    }
    const auto samples = sampler(balls);
    const auto uas = check_UAS(sys, theta, balls, samples, horizon, options);
    v.samples += uas.samples;
    v.failed_integrations += uas.failed_integrations;
    t0s.insert(t0s.end(), uas.probed_t0.begin(), uas.probed_t0.end());
    v.schedule.push_back({balls, theta, uas.holds});
    if (!uas.holds && v.holds) {
      v.holds = false;
      v.counterexample = uas.counterexample;
      std::ostringstream msg;
      msg << "UAS fails for delta=" << balls.delta << ", Delta=" << balls.Delta << ": "
          << uas.note;
      v.note = msg.str();
    }
  }
  std::sort(t0s.begin(), t0s.end());
  t0s.erase(std::unique(t0s.begin(), t0s.end()), t0s.end());
  v.probed_t0 = std::move(t0s);
  v.balls = schedule.back();
  return v;
}

}  // namespace uspas
