#include "uspas/compfn.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "uspas/errors.hpp"

namespace uspas {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string fmt(double x) {
  std::ostringstream out;
  out.precision(17);
  out << x;
  return out.str();
}

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) throw DomainError(std::string(what) + " must be finite");
}

// Index i with s[i] <= x < s[i+1]; callers guarantee s.front() <= x <= s.back().
std::size_t segment_of(const std::vector<double>& s, double x) {
  const auto it = std::upper_bound(s.begin(), s.end(), x);
  return static_cast<std::size_t>(std::distance(s.begin(), it)) - 1;
}

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys,
                   double x) {
  const std::size_t i = segment_of(xs, x);
  if (x == xs[i] || i + 1 == xs.size()) return ys[i];
  return ys[i] + (x - xs[i]) * (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
}

double segment_exponent(const ComparisonFunction::Grid& g, std::size_t i) {
  return std::log(g.v[i + 1] / g.v[i]) / std::log(g.s[i + 1] / g.s[i]);
}

// Power-law grids: v_i (s / s_i)^m_i past the first node, linear before it.
double power_law_eval(const ComparisonFunction::Grid& g, double s) {
  const std::size_t n = g.s.size();
  if (s <= g.s[1]) return g.v[1] * s / g.s[1];
  const std::size_t i = s >= g.s[n - 1] ? n - 2 : segment_of(g.s, s);
  return g.v[i] * std::pow(s / g.s[i], segment_exponent(g, i));
}

double power_law_invert(const ComparisonFunction::Grid& g, double y) {
  const std::size_t n = g.s.size();
  if (y <= g.v[1]) return g.s[1] * y / g.v[1];
  const std::size_t i = y >= g.v[n - 1] ? n - 2 : segment_of(g.v, y);
  return g.s[i] * std::pow(y / g.v[i], 1.0 / segment_exponent(g, i));
}

double last_slope(const ComparisonFunction::Grid& g) {
  const std::size_t n = g.s.size();
  return (g.v[n - 1] - g.v[n - 2]) / (g.s[n - 1] - g.s[n - 2]);
}

double l_tail(const ComparisonFunction::Grid& g, double s) {
  const std::size_t n = g.s.size();
  const double last = g.v[n - 1];
  if (n == 1 || last <= 0.0) return std::max(last, 0.0);
  const double prev = g.v[n - 2];
  if (prev <= last) return last;
  const double rate = std::log(prev / last) / (g.s[n - 1] - g.s[n - 2]);
  return last * std::exp(-rate * (s - g.s[n - 1]));
}

}  // namespace

const char* to_string(Kind kind) {
  switch (kind) {
    case Kind::K:
      return "K";
    case Kind::Kinf:
      return "Kinf";
    case Kind::L:
      return "L";
  }
  return "?";
}

ComparisonFunction ComparisonFunction::linear(double a) { return power(a, 1.0); }

ComparisonFunction ComparisonFunction::power(double a, double p) {
  require_finite(a, "power coefficient");
  require_finite(p, "power exponent");
  if (a <= 0.0 || p <= 0.0)
    throw DomainError("power family needs a > 0 and p > 0, got a=" + fmt(a) +
                      " p=" + fmt(p));
  return ComparisonFunction(Kind::Kinf, Power{a, p});
}

ComparisonFunction ComparisonFunction::saturating_exp(double a, double lambda) {
  require_finite(a, "saturating_exp amplitude");
  require_finite(lambda, "saturating_exp rate");
  if (a <= 0.0 || lambda <= 0.0)
    throw DomainError("saturating_exp needs a > 0 and lambda > 0");
  return ComparisonFunction(Kind::K, SaturatingExp{a, lambda});
}

ComparisonFunction ComparisonFunction::exp_decay(double a, double lambda, double b) {
  require_finite(a, "exp_decay amplitude");
  require_finite(lambda, "exp_decay rate");
  require_finite(b, "exp_decay floor");
  if (a < 0.0 || lambda <= 0.0 || b < 0.0)
    throw DomainError("exp_decay needs a >= 0, lambda > 0, b >= 0");
  return ComparisonFunction(Kind::L, ExpDecay{a, lambda, b});
}

ComparisonFunction ComparisonFunction::constant(double c) {
  require_finite(c, "constant");
  if (c < 0.0) throw DomainError("constant comparison bound must be >= 0");
  ComparisonFunction f(Kind::K, Power{0.0, 1.0});
  f.offset_ = c;
  return f;
}

ComparisonFunction ComparisonFunction::grid(Kind kind, std::vector<double> s,
                                            std::vector<double> v,
                                            Extrapolation extrapolation) {
  if (s.size() != v.size()) throw DomainError("grid: breakpoint columns differ in length");
  const bool increasing = kind != Kind::L;
  if (s.empty() || (increasing && s.size() < 2))
    throw DomainError("grid: too few breakpoints");
  for (std::size_t i = 0; i < s.size(); ++i) {
    require_finite(s[i], "grid abscissa");
    require_finite(v[i], "grid value");
    if (i > 0 && !(s[i] > s[i - 1]))
      throw DomainError("grid: abscissae must be strictly increasing (index " +
                        std::to_string(i) + ")");
  }
  if (s.front() < 0.0) throw DomainError("grid: abscissae must be >= 0");
  if (increasing) {
    if (s.front() != 0.0 || v.front() != 0.0)
      throw KindError("grid: class-K table must start at (0, 0)");
    for (std::size_t i = 1; i < v.size(); ++i)
      if (!(v[i] > v[i - 1]))
        throw KindError("grid: class-K values must be strictly increasing (index " +
                        std::to_string(i) + ")");
    if (kind == Kind::Kinf && extrapolation != Extrapolation::kTail)
      throw KindError("grid: Kinf needs a positive extrapolation slope");
  } else {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 0.0) throw KindError("grid: class-L values must be >= 0");
      if (i > 0 && v[i] > v[i - 1])
        throw KindError("grid: class-L values must be non-increasing (index " +
                        std::to_string(i) + ")");
    }
  }
  return ComparisonFunction(kind, Grid{std::move(s), std::move(v), extrapolation});
}

ComparisonFunction ComparisonFunction::power_law_grid(std::vector<double> s,
                                                      std::vector<double> v) {
  auto f = grid(Kind::Kinf, std::move(s), std::move(v), Extrapolation::kTail);
  std::get<Grid>(f.repr_).power_law = true;
  return f;
}

ComparisonFunction ComparisonFunction::custom(Kind kind, std::function<double(double)> fn,
                                              std::string name, double supremum) {
  if (!fn) throw DomainError("custom comparison function needs a callable");
  if (kind == Kind::Kinf && std::isfinite(supremum))
    throw KindError("custom Kinf function cannot have a finite supremum");
  return ComparisonFunction(kind, Custom{std::move(fn), std::move(name), supremum});
}

double ComparisonFunction::supremum() const {
  if (std::isfinite(domain_max_)) {
    return kind_ == Kind::L ? eval(0.0) : eval(domain_max_);
  }
  if (kind_ == Kind::L) return eval(0.0);
  const double base = std::visit(
      Overloaded{
          [](const Power& p) { return p.a == 0.0 ? 0.0 : kInfinity; },
          [](const SaturatingExp& e) { return e.a; },
          [](const ExpDecay& e) { return e.a + e.b; },
          [](const Grid& g) {
            return g.extrapolation == Extrapolation::kTail ? kInfinity : g.v.back();
          },
          [](const Composite& c) {
            const double inner_sup = c.inner->supremum();
            return std::isfinite(inner_sup) ? (*c.outer)(inner_sup) : c.outer->supremum();
          },
          [](const Inverse& i) { return i.of->domain_max(); },
          [](const Custom& c) { return c.supremum; },
      },
      repr_);
  return base + offset_;
}

double ComparisonFunction::operator()(double s) const {
  if (!(s >= 0.0)) throw DomainError("comparison function evaluated at s=" + fmt(s));
  if (s > domain_max_)
    throw DomainError("s=" + fmt(s) + " beyond domain [0, " + fmt(domain_max_) + "]");
  return offset_ + eval_base(s);
}

double ComparisonFunction::eval_base(double s) const {
  return std::visit(
      Overloaded{
          [s](const Power& p) { return p.a == 0.0 ? 0.0 : p.a * std::pow(s, p.p); },
          [s](const SaturatingExp& e) { return -e.a * std::expm1(-e.lambda * s); },
          [s](const ExpDecay& e) { return e.a * std::exp(-e.lambda * s) + e.b; },
          [this, s](const Grid& g) {
            if (g.power_law) return power_law_eval(g, s);
            if (s > g.s.back()) {
              if (g.extrapolation == Extrapolation::kNone)
                throw DomainError("s=" + fmt(s) + " beyond grid end " + fmt(g.s.back()));
              if (kind_ == Kind::L) return l_tail(g, s);
              return g.v.back() + last_slope(g) * (s - g.s.back());
            }
            if (s < g.s.front()) return g.v.front();
            return interpolate(g.s, g.v, s);
          },
          [s](const Composite& c) { return (*c.outer)((*c.inner)(s)); },
          [s](const Inverse& i) { return i.of->invert(s); },
          [s](const Custom& c) { return c.fn(s); },
      },
      repr_);
}

double ComparisonFunction::invert(double y) const {
  if (kind_ == Kind::L) throw KindError("cannot invert a class-L function");
  if (!(y >= 0.0)) throw RangeError("inversion target y=" + fmt(y) + " is negative");
  const double shifted = y - offset_;
  if (shifted < 0.0)
    throw RangeError("y=" + fmt(y) + " below the offset " + fmt(offset_));
  const double s = invert_base(shifted);
  if (s > domain_max_)
    throw RangeError("y=" + fmt(y) + " outside the range on [0, " + fmt(domain_max_) + "]");
  return s;
}

double ComparisonFunction::invert_base(double y) const {
  if (y == 0.0) return 0.0;
  return std::visit(
      Overloaded{
          [y](const Power& p) {
            if (p.a == 0.0) throw RangeError("constant function has no inverse");
            return std::pow(y / p.a, 1.0 / p.p);
          },
          [y](const SaturatingExp& e) {
            if (y >= e.a)
              throw RangeError("y=" + fmt(y) + " above the bound " + fmt(e.a) +
                               " of a saturating K function");
            return -std::log1p(-y / e.a) / e.lambda;
          },
          [](const ExpDecay&) -> double { throw KindError("exp_decay is not invertible as K"); },
          [y](const Grid& g) {
            if (g.power_law) return power_law_invert(g, y);
            if (y > g.v.back()) {
              if (g.extrapolation == Extrapolation::kNone)
                throw RangeError("y=" + fmt(y) + " above grid range " + fmt(g.v.back()));
              return g.s.back() + (y - g.v.back()) / last_slope(g);
            }
            return interpolate(g.v, g.s, y);
          },
          [y](const Composite& c) { return c.inner->invert(c.outer->invert(y)); },
          [y](const Inverse& i) { return (*i.of)(y); },
          [this, y](const Custom&) { return bisect(y); },
      },
      repr_);
}

double ComparisonFunction::bisect(double y) const {
  const auto& custom = std::get<Custom>(repr_);
  if (y >= custom.supremum)
    throw RangeError("y=" + fmt(y) + " not below the supremum " + fmt(custom.supremum) +
                     " of " + custom.name);
  double lo = 0.0;
  double hi = 1.0;
  while (custom.fn(hi) < y) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300 || hi > domain_max_ * 2.0)
      throw RangeError("y=" + fmt(y) + " not reached by " + custom.name);
  }
  const double y_tol = kInverseTolerance * std::max(1.0, y);
  for (int iter = 0; iter < kInverseMaxIterations; ++iter) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    const double fm = custom.fn(mid);
    if (fm < y) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= kInverseTolerance * std::max(1.0, lo) && std::abs(fm - y) <= y_tol) break;
  }
  return lo + 0.5 * (hi - lo);
}

ComparisonFunction ComparisonFunction::inverse() const {
  if (kind_ == Kind::L) throw KindError("class-L functions have no K inverse");
  if (offset_ == 0.0 && !std::isfinite(domain_max_)) {
    if (const auto* p = std::get_if<Power>(&repr_); p && p->a > 0.0)
      return power(std::pow(p->a, -1.0 / p->p), 1.0 / p->p);
    if (const auto* g = std::get_if<Grid>(&repr_))
      return g->power_law ? power_law_grid(g->v, g->s) : grid(kind_, g->v, g->s, g->extrapolation);
    if (const auto* i = std::get_if<Inverse>(&repr_)) return *i->of;
  }
  const double sup = supremum();
  ComparisonFunction inv(std::isfinite(domain_max_) ? Kind::K : Kind::Kinf,
                         Inverse{std::make_shared<const ComparisonFunction>(*this)});
  if (std::isfinite(sup)) {
    inv.kind_ = Kind::K;
    inv.domain_max_ = sup;
  }
  return inv;
}

ComparisonFunction ComparisonFunction::with_offset(double c) const {
  if (!(c >= 0.0) || !std::isfinite(c)) throw DomainError("offset must be finite and >= 0");
  ComparisonFunction f = *this;
  f.offset_ += c;
  return f;
}

ComparisonFunction ComparisonFunction::restricted(double s_max) const {
  if (!(s_max > 0.0)) throw DomainError("restriction bound must be positive");
  ComparisonFunction f = *this;
  f.domain_max_ = std::min(domain_max_, s_max);
  if (f.kind_ == Kind::Kinf) f.kind_ = Kind::K;
  return f;
}

ComparisonFunction::Grid ComparisonFunction::sample(std::span<const double> nodes) const {
  Grid g;
  g.s.assign(nodes.begin(), nodes.end());
  g.v.reserve(nodes.size());
  for (double s : nodes) g.v.push_back(eval(s));
  g.extrapolation = Extrapolation::kTail;
  return g;
}

std::string ComparisonFunction::family() const {
  return std::visit(
      Overloaded{
          [](const Power& p) -> std::string {
            if (p.a == 0.0) return "constant";
            return p.p == 1.0 ? "linear" : "power";
          },
          [](const SaturatingExp&) -> std::string { return "saturating_exp"; },
          [](const ExpDecay&) -> std::string { return "exp_decay"; },
          [](const Grid& g) -> std::string { return g.power_law ? "power_law_grid" : "grid"; },
          [](const Composite&) -> std::string { return "composite"; },
          [](const Inverse&) -> std::string { return "inverse"; },
          [](const Custom& c) -> std::string { return c.name; },
      },
      repr_);
}

ComparisonFunction compose(const ComparisonFunction& f, const ComparisonFunction& g,
                           std::optional<Kind> requested) {
  Kind inferred;
  if (f.is_increasing_kind() && g.is_increasing_kind()) {
    inferred = (f.kind() == Kind::Kinf && g.kind() == Kind::Kinf) ? Kind::Kinf : Kind::K;
  } else if (f.is_increasing_kind() && g.kind() == Kind::L) {
    inferred = Kind::L;
  } else if (f.kind() == Kind::L && g.kind() == Kind::Kinf) {
    inferred = Kind::L;
  } else {
    throw KindError(std::string("cannot compose ") + to_string(f.kind()) + " with " +
                    to_string(g.kind()));
  }
  if (requested && *requested != inferred &&
      !(*requested == Kind::K && inferred == Kind::Kinf)) {
    throw KindError(std::string("composition of ") + to_string(f.kind()) + " and " +
                    to_string(g.kind()) + " is " + to_string(inferred) + ", not " +
                    to_string(*requested));
  }
  if (g.supremum() > f.domain_max())
    throw DomainError("range of inner function exceeds domain of outer function");

  const auto* fp = std::get_if<ComparisonFunction::Power>(&f.repr());
  const auto* gp = std::get_if<ComparisonFunction::Power>(&g.repr());
  if (fp && gp && fp->a > 0.0 && gp->a > 0.0 && f.offset() == 0.0 && g.offset() == 0.0 &&
      !std::isfinite(f.domain_max()) && !std::isfinite(g.domain_max())) {
    return ComparisonFunction::power(fp->a * std::pow(gp->a, fp->p), fp->p * gp->p);
  }

  ComparisonFunction composed(
      inferred, ComparisonFunction::Composite{std::make_shared<const ComparisonFunction>(f),
                                              std::make_shared<const ComparisonFunction>(g)});
  composed.domain_max_ = g.domain_max();
  return composed;
}

std::vector<double> export_nodes(double lo, double hi, int count) {
  std::vector<double> nodes{0.0};
  if (count < 2 || !(hi > lo) || !(lo > 0.0)) {
    nodes.push_back(hi > 0.0 ? hi : 1.0);
    return nodes;
  }
  const double ratio = std::log(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i) nodes.push_back(lo * std::exp(ratio * i));
  nodes.back() = hi;
  return nodes;
}

}  // namespace uspas
