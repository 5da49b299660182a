#include "uspas/klbound.hpp"

#include <algorithm>
#include <cmath>

#include "uspas/errors.hpp"

namespace uspas {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::size_t segment(const std::vector<double>& xs, double x) {
  if (x <= xs.front()) return 0;
  if (x >= xs.back()) return xs.size() - 2;
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  return static_cast<std::size_t>(std::distance(xs.begin(), it)) - 1;
}

double surface_value(const KLBound::GridSurface& g, double s, double t) {
  const std::size_t nt = g.t.size();
  auto at = [&](std::size_t i, std::size_t j) { return g.values[i * nt + j]; };
  // Column interpolation in t (held constant outside the table).
  auto column = [&](std::size_t i) {
    if (nt == 1 || t <= g.t.front()) return at(i, 0);
    if (t >= g.t.back()) return at(i, nt - 1);
    const std::size_t j = segment(g.t, t);
    const double w = (t - g.t[j]) / (g.t[j + 1] - g.t[j]);
    return at(i, j) + w * (at(i, j + 1) - at(i, j));
  };
  if (g.s.size() == 1) return column(0);
  const std::size_t i = segment(g.s, s);
  const double w = (s - g.s[i]) / (g.s[i + 1] - g.s[i]);
  const double lo = column(i);
  const double hi = column(i + 1);
  return std::max(0.0, lo + w * (hi - lo));
}

}  // namespace

KLBound KLBound::product(ComparisonFunction eta, double rate, double shift) {
  if (!eta.is_increasing_kind()) throw KindError("KL product needs a class-K factor");
  if (!(rate > 0.0) || !std::isfinite(rate)) throw DomainError("KL product rate must be > 0");
  if (!std::isfinite(shift)) throw DomainError("KL product shift must be finite");
  return KLBound(Product{std::move(eta), rate, shift});
}

KLBound KLBound::min_envelope(ComparisonFunction eta, ComparisonFunction sigma, double eps) {
  if (!eta.is_increasing_kind()) throw KindError("min envelope needs eta of class K");
  if (sigma.kind() != Kind::L) throw KindError("min envelope needs sigma of class L");
  return KLBound(MinEnvelope{std::move(eta), std::move(sigma), eps});
}

KLBound KLBound::max_of(std::vector<KLBound> parts) {
  if (parts.empty()) throw DomainError("max of an empty set of KL bounds");
  Max m;
  for (auto& p : parts) m.parts.push_back(std::make_shared<const KLBound>(std::move(p)));
  return KLBound(std::move(m));
}

KLBound KLBound::min_of(std::vector<KLBound> parts) {
  if (parts.empty()) throw DomainError("min of an empty set of KL bounds");
  Min m;
  for (auto& p : parts) m.parts.push_back(std::make_shared<const KLBound>(std::move(p)));
  return KLBound(std::move(m));
}

KLBound KLBound::grid(std::vector<double> s, std::vector<double> t, std::vector<double> values) {
  if (s.empty() || t.empty() || values.size() != s.size() * t.size())
    throw DomainError("KL grid: value table must be |s| x |t|");
  for (std::size_t i = 1; i < s.size(); ++i)
    if (!(s[i] > s[i - 1])) throw DomainError("KL grid: s nodes must be strictly increasing");
  for (std::size_t j = 1; j < t.size(); ++j)
    if (!(t[j] > t[j - 1])) throw DomainError("KL grid: t nodes must be strictly increasing");
  for (double v : values)
    if (!std::isfinite(v) || v < 0.0) throw DomainError("KL grid: values must be finite and >= 0");
  return KLBound(GridSurface{std::move(s), std::move(t), std::move(values)});
}

KLBound KLBound::custom(std::function<double(double, double)> fn, std::string name) {
  if (!fn) throw DomainError("custom KL bound needs a callable");
  return KLBound(Custom{std::move(fn), std::move(name)});
}

double KLBound::operator()(double s, double t) const {
  if (!(s >= 0.0)) throw DomainError("KL bound evaluated at negative s");
  return std::visit(
      Overloaded{
          [&](const Product& p) { return p.eta(s) * std::exp(-p.rate * (t - p.shift)); },
          [&](const MinEnvelope& m) {
            return std::min(m.eta(s), m.sigma(std::max(t, 0.0))) +
                   m.eps * std::min(s, 1.0) * std::exp(-t);
          },
          [&](const Max& m) {
            double best = 0.0;
            for (const auto& p : m.parts) best = std::max(best, (*p)(s, t));
            return best;
          },
          [&](const Min& m) {
            double best = kInfinity;
            for (const auto& p : m.parts) best = std::min(best, (*p)(s, t));
            return best;
          },
          [&](const GridSurface& g) { return surface_value(g, s, t); },
          [&](const Custom& c) { return c.fn(s, t); },
      },
      repr_);
}

std::string KLBound::family() const {
  return std::visit(Overloaded{
                        [](const Product&) -> std::string { return "product"; },
                        [](const MinEnvelope&) -> std::string { return "min_envelope"; },
                        [](const Max&) -> std::string { return "max"; },
                        [](const Min&) -> std::string { return "min"; },
                        [](const GridSurface&) -> std::string { return "grid"; },
                        [](const Custom& c) -> std::string { return c.name; },
                    },
                    repr_);
}

KLBound::GridSurface KLBound::sample(std::span<const double> s_nodes,
                                     std::span<const double> t_nodes) const {
  GridSurface g;
  g.s.assign(s_nodes.begin(), s_nodes.end());
  g.t.assign(t_nodes.begin(), t_nodes.end());
  g.values.reserve(g.s.size() * g.t.size());
  for (double s : g.s)
    for (double t : g.t) g.values.push_back((*this)(s, t));
  return g;
}

KLInvariantReport check_kl_invariants(const KLBound& beta, std::span<const double> s_nodes,
                                      std::span<const double> t_nodes, double tail_tol) {
  KLInvariantReport report;
  if (s_nodes.empty() || t_nodes.empty()) return report;
  const auto table = beta.sample(s_nodes, t_nodes);
  const std::size_t ns = s_nodes.size();
  const std::size_t nt = t_nodes.size();
  auto at = [&](std::size_t i, std::size_t j) { return table.values[i * nt + j]; };
  for (std::size_t j = 0; j < nt; ++j) {
    if (s_nodes[0] == 0.0 && at(0, j) != 0.0) report.zero_at_origin = false;
    for (std::size_t i = 1; i < ns; ++i) {
      const double drop = at(i - 1, j) - at(i, j);
      if (drop > 0.0) {
        report.increasing_in_s = false;
        report.worst_s_violation = std::max(report.worst_s_violation, drop);
      }
    }
  }
  for (std::size_t i = 0; i < ns; ++i) {
    for (std::size_t j = 1; j < nt; ++j) {
      const double rise = at(i, j) - at(i, j - 1);
      if (rise > 0.0) {
        report.decreasing_in_t = false;
        report.worst_t_violation = std::max(report.worst_t_violation, rise);
      }
    }
    if (at(i, nt - 1) > tail_tol) report.tail_small = false;
  }
  return report;
}

KLBound kl_from_US_UA(const ComparisonFunction& eta, const ComparisonFunction& sigma) {
  return KLBound::min_envelope(eta, sigma, kRegularizationEpsilon);
}

}  // namespace uspas
