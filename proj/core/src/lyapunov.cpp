#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "uspas/cascade_synth.hpp"
#include "uspas/errors.hpp"

namespace uspas {
namespace {

Vector random_direction(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim);
  do {
    for (int i = 0; i < dim; ++i) v[i] = normal(rng);
  } while (v.norm() < 1e-12);
  return v / v.norm();
}

// Radius in [lo, hi]: log-uniform over wide annuli, uniform otherwise.
double random_radius(double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  if (lo > 0.0 && hi / lo > 100.0) return lo * std::pow(hi / lo, u);
  return lo + (hi - lo) * u;
}

// Annulus probes: both boundary spheres first, then random radii.
std::vector<Vector> annulus_points(int dim, double lo, double hi, std::size_t count,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Vector> pts;
  pts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double r = i == 0 ? lo : (i == 1 ? hi : random_radius(lo, hi, rng));
    pts.push_back(r * random_direction(dim, rng));
  }
  return pts;
}

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = simpson(a, m, fa, flm, fm);
  const double right = simpson(m, b, fm, frm, fb);
  const double diff = left + right - whole;
  if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double rel_tol) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = simpson(a, b, fa, fm, fb);
  const double tol = rel_tol * std::max(1e-300, std::abs(whole));
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 40);
}

}  // namespace

double LyapunovCertificate::k() const {
  if (const auto* e = std::get_if<ExponentialDecay>(&decay)) return e->k;
  throw KindError("certificate is in rate form, not exponential form");
}

Gradient finite_difference_gradient(const LyapunovFn& V, double t, const Vector& x) {
  Gradient g;
  g.dx = Vector::Zero(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x[i]));
    xp[i] = x[i] + h;
    const double up = V(t, xp);
    xp[i] = x[i] - h;
    const double down = V(t, xp);
    xp[i] = x[i];
    g.dx[i] = (up - down) / (2.0 * h);
  }
  const double ht = 1e-6 * (1.0 + std::abs(t));
  g.dt = (V(t + ht, x) - V(t - ht, x)) / (2.0 * ht);
  return g;
}

Gradient LyapunovCertificate::gradient(double t, const Vector& x) const {
  if (grad) return grad(t, x);
  return finite_difference_gradient(V, t, x);
}

double LyapunovCertificate::derivative(const ParameterizedSystem& sys, double t,
                                       const Vector& x) const {
  const Gradient g = gradient(t, x);
  return g.dt + g.dx.dot(sys(t, x, theta));
}

void LyapunovCertificate::validate() const {
  if (!V) throw PreconditionError("certificate without V");
  if (const auto* e = std::get_if<ExponentialDecay>(&decay); e && !(e->k > 0.0))
    throw PreconditionError("exponential decay rate must be positive");
  const double hi = std::isfinite(annulus.Delta) ? annulus.Delta : 1e3;
  for (int i = 0; i <= 32; ++i) {
    const double s = hi * i / 32.0;
    if (alpha_lo(s) > alpha_hi(s) * (1.0 + 1e-12))
      throw PreconditionError("alpha_lo exceeds alpha_hi at s=" + std::to_string(s));
  }
}

ComparisonFunction transform_rho(const LyapunovCertificate& cert, double k_target) {
  const auto* rate = std::get_if<RateDecay>(&cert.decay);
  if (!rate) throw PreconditionError("transform_lyapunov needs a rate-form certificate");
  if (!(k_target > 0.0)) throw PreconditionError("k_target must be positive");
  const double delta = cert.annulus.delta;
  const double Delta = cert.annulus.Delta;
  if (!(delta > 0.0)) throw PreconditionError("transform_lyapunov needs delta > 0");
  if (!std::isfinite(Delta)) throw PreconditionError("transform_lyapunov needs a finite Delta");

  const ComparisonFunction& alpha = rate->alpha;
  const ComparisonFunction& hi_fn = cert.alpha_hi;
  auto a = [&](double q) {
    const double v = alpha(hi_fn.invert(q));
    if (!(v > 0.0) || !std::isfinite(v)) {
      std::ostringstream msg;
      msg << "a(q) = alpha(alpha_hi^{-1}(q)) is not positive at q=" << q;
      throw TransformError(msg.str());
    }
    return v;
  };

  double lo = cert.alpha_lo(delta) * 1e-3;
  double hi = hi_fn(Delta);
  if (!(lo > 0.0) || !(hi > lo)) throw TransformError("degenerate quadrature range");
  double anchor = 1.0;
  if (anchor < hi_fn.supremum()) {
    lo = std::min(lo, anchor);
    hi = std::max(hi, anchor);
  } else {
    anchor = hi;
  }

  constexpr int kNodes = 400;
  std::vector<double> q(kNodes);
  const double step = std::log(hi / lo) / (kNodes - 1);
  for (int i = 0; i < kNodes; ++i) q[static_cast<std::size_t>(i)] = lo * std::exp(step * i);
  q.front() = lo;
  q.back() = hi;
  q.push_back(anchor);
  std::sort(q.begin(), q.end());
  q.erase(std::unique(q.begin(), q.end()), q.end());
  const auto anchor_at = static_cast<std::size_t>(
      std::distance(q.begin(), std::find(q.begin(), q.end(), anchor)));

  // Integrate k dq / a(q) = k q / a(q) du with q = e^u, node by node.
  auto integrand = [&](double u) {
    const double qq = std::exp(u);
    return k_target * qq / a(qq);
  };
  std::vector<double> I(q.size(), 0.0);
  for (std::size_t i = anchor_at; i + 1 < q.size(); ++i)
    I[i + 1] = I[i] + integrate(integrand, std::log(q[i]), std::log(q[i + 1]), 1e-9);
  for (std::size_t i = anchor_at; i > 0; --i)
    I[i - 1] = I[i] - integrate(integrand, std::log(q[i - 1]), std::log(q[i]), 1e-9);

  std::vector<double> xs{0.0};
  std::vector<double> vs{0.0};
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double rho = std::exp(I[i]);
    if (!std::isfinite(rho)) throw TransformError("rho overflows on the quadrature range");
    if (!(rho > vs.back())) continue;  // underflow below the anchor
    xs.push_back(q[i]);
    vs.push_back(rho);
  }
  if (xs.size() < 3) throw TransformError("rho underflows on the quadrature range");
  // Interpolating log rho against log q keeps rho's slope close to k rho / a,
  // and exact when a is a power law.
  return ComparisonFunction::power_law_grid(std::move(xs), std::move(vs));
}

LyapunovCertificate transform_lyapunov(const LyapunovCertificate& cert, double k_target) {
  const ComparisonFunction rho = transform_rho(cert, k_target);
  const auto& rate = std::get<RateDecay>(cert.decay);
  const ComparisonFunction alpha = rate.alpha;
  const ComparisonFunction hi_fn = cert.alpha_hi;
  auto a = [alpha, hi_fn](double q) { return alpha(hi_fn.invert(q)); };

  LyapunovCertificate out;
  const LyapunovFn V = cert.V;
  out.V = [V, rho](double t, const Vector& x) { return rho(V(t, x)); };
  const LyapunovCertificate inner = cert;
  out.grad = [inner, rho, a, k_target](double t, const Vector& x) {
    const double v = inner.V(t, x);
    Gradient g = inner.gradient(t, x);
    // rho'(q) = k rho(q) / a(q); rho'(0) is taken as 0.
    const double slope = v > 0.0 ? k_target * rho(v) / a(v) : 0.0;
    g.dt *= slope;
    g.dx *= slope;
    return g;
  };
  out.alpha_lo = compose(rho, cert.alpha_lo, Kind::K);
  out.alpha_hi = compose(rho, cert.alpha_hi, Kind::K);
  out.decay = ExponentialDecay{k_target};
  out.annulus = cert.annulus;
  out.theta = cert.theta;
  if (cert.c) {
    const double a_delta = a(cert.alpha_lo(cert.annulus.delta));
    const ComparisonFunction c = *cert.c;
    out.c = ComparisonFunction::custom(
        Kind::K,
        [=](double s) { return k_target * rho(hi_fn(s)) / a_delta * c(s); },
        "lemma1_gradient_bound");
  }
  return out;
}

double lemma2_bound(const ComparisonFunction& alpha_lo, const ComparisonFunction& alpha_hi,
                    double k, double c, double delta, double x0_norm, double t_elapsed) {
  if (!(k > 0.0)) throw PreconditionError("lemma2_bound needs k > 0");
  if (!(c >= 0.0)) throw PreconditionError("lemma2_bound needs c >= 0");
  if (!(t_elapsed >= 0.0)) throw PreconditionError("lemma2_bound needs t - t0 >= 0");
  const double residual = alpha_lo.invert(alpha_hi(delta) + c / k);
  const double transient = alpha_lo.invert(alpha_hi(x0_norm) * std::exp(-k * t_elapsed) + c / k);
  return residual + transient;
}

double prop_bound(const ComparisonFunction& alpha_lo, const ComparisonFunction& alpha_hi,
                  double a, double b) {
  if (!(a >= 0.0) || !(b > 0.0)) throw PreconditionError("prop_bound needs a >= 0 and b > 0");
  if (!(alpha_hi(a) < alpha_lo(b))) {
    std::ostringstream msg;
    msg << "prop_bound hypothesis alpha_hi(a) < alpha_lo(b) fails: " << alpha_hi(a)
        << " >= " << alpha_lo(b);
    throw PreconditionError(msg.str());
  }
  return alpha_hi.invert(alpha_lo(b));
}

FalsifierReport falsify_nonincrease(const ParameterizedSystem& sys, const Vector& theta,
                                    const LyapunovFn& V, const LyapunovGradientFn& grad,
                                    double a, double b, const FalsifierOptions& options) {
  if (!(b > a) || !(a >= 0.0)) throw PreconditionError("falsifier needs 0 <= a < b");
  const auto start = std::chrono::steady_clock::now();
  FalsifierReport report;
  const auto pts = annulus_points(sys.dim, a, b, options.samples, options.seed);
  for (const auto& x : pts) {
    for (double t : options.t_grid) {
      const Gradient g = grad ? grad(t, x) : finite_difference_gradient(V, t, x);
      const double vdot = g.dt + g.dx.dot(sys(t, x, theta));
      ++report.probes;
      if (vdot > report.worst.vdot) report.worst = {t, x, vdot};
      if (vdot > options.tolerance) {
        ++report.violations;
        if (!report.first) report.first = NonincreaseWitness{t, x, vdot};
      }
    }
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

LyapunovUspasReport check_lyapunov_uspas(const ParameterizedSystem& sys,
                                         const CertificateFamily& family,
                                         const std::vector<double>& delta_seq,
                                         const std::vector<double>& Delta_seq,
                                         const LyapunovUspasOptions& options) {
  if (delta_seq.empty() || Delta_seq.empty())
    throw PreconditionError("Lyapunov USPAS check needs nonempty delta and Delta sequences");
  LyapunovUspasReport report;
  std::uint64_t pair_index = 0;
  for (double delta : delta_seq) {
    for (double Delta : Delta_seq) {
      if (!(delta < Delta)) continue;
      const BallPair balls{delta, Delta};
      const LyapunovCertificate cert = family(balls);
      const auto pts = annulus_points(sys.dim, delta, Delta, options.samples_per_pair,
                                      options.seed + 7919 * pair_index++);
      ConditionResult sandwich;
      sandwich.name = "sandwich";
      ConditionResult decrease;
      decrease.name = "decrease";
      for (const auto& x : pts) {
        const double r = x.norm();
        for (double t : options.t_grid) {
          const double v = cert.V(t, x);
          const double lo = cert.alpha_lo(r);
          const double hi = cert.alpha_hi(r);
          const double tol = 1e-12 * (1.0 + std::abs(v));
          const double sandwich_margin = std::max(lo - v, v - hi);
          ++sandwich.probes;
          sandwich.worst_margin = sandwich.probes == 1
                                      ? sandwich_margin
                                      : std::max(sandwich.worst_margin, sandwich_margin);
          if (sandwich_margin > tol) {
            ++sandwich.violations;
            if (!sandwich.counterexample)
              sandwich.counterexample =
                  Counterexample{t, x, t, sandwich_margin, "alpha_lo(|x|) <= V <= alpha_hi(|x|) fails"};
          }

          const Gradient g = cert.gradient(t, x);
          const Vector fx = sys(t, x, cert.theta);
          const double vdot = g.dt + g.dx.dot(fx);
          const double target = cert.exponential() ? -cert.k() * v
                                                   : -std::get<RateDecay>(cert.decay).alpha(r);
          const double margin = vdot - target;
          const double dtol =
              1e-9 * (1.0 + std::abs(target) + std::abs(g.dt) + g.dx.norm() * fx.norm());
          ++decrease.probes;
          decrease.worst_margin =
              decrease.probes == 1 ? margin : std::max(decrease.worst_margin, margin);
          if (margin > dtol) {
            ++decrease.violations;
            if (!decrease.counterexample)
              decrease.counterexample = Counterexample{t, x, t, margin, "decrease condition fails"};
          }
        }
      }
      sandwich.holds = sandwich.violations == 0;
      decrease.holds = decrease.violations == 0;
      report.pairs.push_back(balls);
      report.sandwich.push_back(std::move(sandwich));
      report.decrease.push_back(std::move(decrease));
    }
  }

  auto limit = [&](bool small_side) {
    LimitSequence seq;
    const auto& args = small_side ? delta_seq : Delta_seq;
    for (double arg : args) {
      const BallPair balls = small_side ? BallPair{arg, Delta_seq.front()}
                                        : BallPair{delta_seq.front(), arg};
      if (!(balls.delta < balls.Delta)) continue;
      const LyapunovCertificate cert = family(balls);
      double value;
      try {
        value = small_side ? cert.alpha_lo.invert(cert.alpha_hi(arg))
                           : cert.alpha_hi.invert(cert.alpha_lo(arg));
      } catch (const RangeError& e) {
        seq.holds = false;
        seq.note = e.what();
        return seq;
      }
      if (!seq.values.empty()) {
        const double prev = seq.values.back();
        if (small_side ? value > prev : value < prev) seq.monotone = false;
      }
      seq.arguments.push_back(arg);
      seq.values.push_back(value);
    }
    if (seq.values.empty()) {
      seq.holds = false;
      seq.note = "no admissible ball pairs";
      return seq;
    }
    const double last = seq.values.back();
    seq.reaches_target = small_side ? last < options.limit_tol : last > 1.0 / options.limit_tol;
    seq.holds = seq.monotone && seq.reaches_target;
    if (!seq.holds) {
      std::ostringstream msg;
      msg << (seq.monotone ? "" : "not monotone; ") << "last value " << last
          << (small_side ? " not below " : " not above ")
          << (small_side ? options.limit_tol : 1.0 / options.limit_tol);
      seq.note = msg.str();
    }
    return seq;
  };
  report.condadd = limit(true);
  report.condadd2 = limit(false);

  report.holds = report.condadd.holds && report.condadd2.holds && !report.pairs.empty();
  for (std::size_t i = 0; i < report.pairs.size(); ++i)
    report.holds = report.holds && report.sandwich[i].holds && report.decrease[i].holds;
  return report;
}

}  // namespace uspas
