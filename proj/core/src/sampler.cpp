#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "uspas/errors.hpp"
#include "uspas/sysmodel.hpp"

namespace uspas {
namespace {

// Radical inverse in base b (Halton coordinate).
double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0;
  double r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

Vector gaussian_direction(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  do {
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

void check_dim(int dim) {
  if (dim <= 0) throw DimensionError("sampler dimension must be positive");
}

}  // namespace

std::vector<double> default_t0_probes(double horizon) {
  return {0.0, horizon / 3.0, 2.0 * horizon / 3.0, horizon, 10.0 * horizon};
}

std::vector<Vector> sphere_directions(int dim, int count, std::uint64_t seed) {
  check_dim(dim);
  if (count <= 0) throw PreconditionError("direction count must be positive");
  std::vector<Vector> dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  if (dim == 1) {
    for (int i = 0; i < count; ++i) dirs.push_back(Vector::Constant(1, i % 2 == 0 ? 1.0 : -1.0));
    return dirs;
  }
  if (dim == 2) {
    for (int i = 0; i < count; ++i) {
      const double phi = 2.0 * std::numbers::pi * i / count;
      Vector v(2);
      v << std::cos(phi), std::sin(phi);
      dirs.push_back(v);
    }
    return dirs;
  }
  if (dim == 3) {
    // Fibonacci lattice.
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / count;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      Vector v(3);
      v << r * std::cos(golden * i), r * std::sin(golden * i), z;
      dirs.push_back(v);
    }
    return dirs;
  }
  if (dim == 4) {
    // Hopf coordinates driven by a Halton sequence.
    for (int i = 0; i < count; ++i) {
      const auto k = static_cast<std::uint64_t>(i + 1);
      const double u = halton(k, 2);
      const double a = 2.0 * std::numbers::pi * halton(k, 3);
      const double b = 2.0 * std::numbers::pi * halton(k, 5);
      const double r1 = std::sqrt(u);
      const double r2 = std::sqrt(1.0 - u);
      Vector v(4);
      v << r1 * std::cos(a), r1 * std::sin(a), r2 * std::cos(b), r2 * std::sin(b);
      dirs.push_back(v);
    }
    return dirs;
  }
  std::mt19937_64 rng(seed);
  for (int i = 0; i < count; ++i) dirs.push_back(gaussian_direction(dim, rng));
  return dirs;
}

InitialConditionSampler InitialConditionSampler::shells(int dim, double max_radius,
                                                        double horizon, const ShellPlan& plan,
                                                        std::uint64_t seed) {
  check_dim(dim);
  if (!(max_radius > 0.0) || !std::isfinite(max_radius))
    throw PreconditionError("shell sampler needs a finite positive radius");
  if (plan.radii <= 0 || plan.directions <= 0)
    throw PreconditionError("shell sampler needs positive radius and direction counts");
  if (!(plan.inner_fraction > 0.0) || plan.inner_fraction > 1.0)
    throw PreconditionError("inner_fraction must lie in (0, 1]");
  const auto probes = plan.t0_probes.empty() ? default_t0_probes(horizon) : plan.t0_probes;
  const auto dirs = sphere_directions(dim, plan.directions, seed);

  std::vector<double> radii(static_cast<std::size_t>(plan.radii));
  const double inner = plan.inner_fraction * max_radius;
  for (int k = 0; k < plan.radii; ++k) {
    radii[static_cast<std::size_t>(k)] =
        plan.radii == 1 ? max_radius
                        : inner * std::pow(max_radius / inner,
                                           static_cast<double>(k) / (plan.radii - 1));
  }
  radii.back() = max_radius;

  std::vector<InitialCondition> out;
  out.reserve(probes.size() * radii.size() * dirs.size());
  for (double t0 : probes)
    for (double r : radii)
      for (const auto& d : dirs) out.push_back({t0, r * d});
  return InitialConditionSampler(std::move(out));
}

InitialConditionSampler InitialConditionSampler::uniform_ball(int dim, double radius,
                                                              std::size_t count,
                                                              std::vector<double> t0_probes,
                                                              std::uint64_t seed) {
  check_dim(dim);
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw PreconditionError("ball sampler needs a finite positive radius");
  if (t0_probes.empty()) t0_probes = {0.0};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<InitialCondition> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Vector d = gaussian_direction(dim, rng);
    const double r = radius * std::pow(unit(rng), 1.0 / dim);
    out.push_back({t0_probes[i % t0_probes.size()], r * d});
  }
  return InitialConditionSampler(std::move(out));
}

InitialConditionSampler InitialConditionSampler::sphere(int dim, double radius,
                                                        std::size_t count,
                                                        std::vector<double> t0_probes,
                                                        std::uint64_t seed) {
  check_dim(dim);
  if (!(radius >= 0.0) || !std::isfinite(radius))
    throw PreconditionError("sphere sampler needs a finite radius >= 0");
  if (t0_probes.empty()) t0_probes = {0.0};
  std::mt19937_64 rng(seed);
  std::vector<InitialCondition> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back({t0_probes[i % t0_probes.size()], radius * gaussian_direction(dim, rng)});
  return InitialConditionSampler(std::move(out));
}

InitialConditionSampler InitialConditionSampler::from_list(std::vector<InitialCondition> samples) {
  if (samples.empty()) throw PreconditionError("empty initial-condition list");
  const auto dim = samples.front().x0.size();
  for (const auto& s : samples)
    if (s.x0.size() != dim) throw DimensionError("initial conditions differ in dimension");
  return InitialConditionSampler(std::move(samples));
}

std::vector<double> InitialConditionSampler::probed_t0() const {
  std::set<double> t0s;
  for (const auto& s : samples_) t0s.insert(s.t0);
  return {t0s.begin(), t0s.end()};
}

}  // namespace uspas
