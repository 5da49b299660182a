#include <algorithm>
#include <cmath>
#include <vector>

#include "uspas/compfn.hpp"
#include "uspas/errors.hpp"

namespace uspas {
namespace {

// Sorted by abscissa, one entry per distinct abscissa holding the largest
// value (negative values clamp to 0: every envelope is nonnegative).
std::vector<EnvelopeSample> collapse(std::span<const EnvelopeSample> samples) {
  if (samples.empty()) throw PreconditionError("envelope fit needs at least one sample");
  std::vector<EnvelopeSample> sorted(samples.begin(), samples.end());
  for (const auto& smp : sorted) {
    if (!std::isfinite(smp.s) || !std::isfinite(smp.value))
      throw DomainError("envelope samples must be finite");
    if (smp.s < 0.0) throw DomainError("envelope samples need s >= 0");
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const EnvelopeSample& a, const EnvelopeSample& b) { return a.s < b.s; });
  std::vector<EnvelopeSample> out;
  out.reserve(sorted.size());
  for (const auto& smp : sorted) {
    const double v = std::max(smp.value, 0.0);
    if (!out.empty() && out.back().s == smp.s) {
      out.back().value = std::max(out.back().value, v);
    } else {
      out.push_back({smp.s, v});
    }
  }
  return out;
}

double bump_above(double previous, double s) {
  double candidate = previous + kStrictEpsilon * (1.0 + s);
  if (!(candidate > previous)) candidate = std::nextafter(previous, kInfinity);
  return candidate;
}

}  // namespace

ComparisonFunction fit_K_envelope(std::span<const EnvelopeSample> samples) {
  const auto points = collapse(samples);
  std::vector<double> xs{0.0};
  std::vector<double> vs{0.0};
  double running = 0.0;
  for (const auto& p : points) {
    if (p.s == 0.0) {
      if (p.value > 0.0)
        throw StabilityAtZeroError("sample at s=0 has value " + std::to_string(p.value) +
                                   "; the envelope cannot vanish at the origin");
      continue;
    }
    running = std::max(running, p.value);
    double v = std::max(running, kRegularizationEpsilon * p.s);
    if (!(v > vs.back())) v = bump_above(vs.back(), p.s);
    xs.push_back(p.s);
    vs.push_back(v);
  }
  if (xs.size() == 1) {
    xs.push_back(1.0);
    vs.push_back(kRegularizationEpsilon);
  }
  return ComparisonFunction::grid(Kind::Kinf, std::move(xs), std::move(vs),
                                  Extrapolation::kTail);
}

ComparisonFunction fit_L_envelope(std::span<const EnvelopeSample> samples) {
  const auto points = collapse(samples);
  std::vector<double> ts(points.size());
  std::vector<double> vs(points.size());
  double running = 0.0;
  for (std::size_t k = points.size(); k-- > 0;) {
    running = std::max(running, points[k].value);
    ts[k] = points[k].s;
    vs[k] = running;
  }
  return ComparisonFunction::grid(Kind::L, std::move(ts), std::move(vs), Extrapolation::kTail);
}

}  // namespace uspas
