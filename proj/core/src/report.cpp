#include "uspas/report.hpp"

#include <algorithm>
#include <cmath>

#include "numfmt.hpp"

namespace uspas::report {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<double> clip_nodes(const ComparisonFunction& f, std::span<const double> nodes) {
  std::vector<double> out;
  for (double s : nodes)
    if (s <= f.domain_max()) out.push_back(s);
  return out;
}

Json closed_form(const ComparisonFunction& f) {
  return std::visit(
      Overloaded{
          [](const ComparisonFunction::Power& p) {
            return Json{{"a", number(p.a)}, {"p", number(p.p)}};
          },
          [](const ComparisonFunction::SaturatingExp& p) {
            return Json{{"a", number(p.a)}, {"lambda", number(p.lambda)}};
          },
          [](const ComparisonFunction::ExpDecay& p) {
            return Json{{"a", number(p.a)}, {"lambda", number(p.lambda)}, {"b", number(p.b)}};
          },
          [](const ComparisonFunction::Grid& g) {
            return Json{{"s", vector(std::span<const double>(g.s))},
                        {"v", vector(std::span<const double>(g.v))},
                        {"extrapolation",
                         g.extrapolation == Extrapolation::kTail ? "tail" : "none"},
                        {"interpolation", g.power_law ? "power_law" : "linear"}};
          },
          [](const ComparisonFunction::Custom& c) { return Json{{"name", c.name}}; },
          [](const auto&) { return Json(nullptr); },
      },
      f.repr());
}

}  // namespace

ExportGrid make_export_grid(double s_max, double horizon, int count) {
  ExportGrid g;
  const double hi = std::isfinite(s_max) && s_max > 0.0 ? s_max : 1.0;
  g.s = export_nodes(hi * 1e-3, hi, count);
  const double T = std::isfinite(horizon) && horizon > 0.0 ? horizon : 1.0;
  for (int i = 0; i <= count; ++i) g.t.push_back(T * i / count);
  return g;
}

Json number(double v) {
  if (std::isfinite(v)) return v;
  return detail::format_number(v);
}

Json vector(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

Json vector(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

Json to_json(const ComparisonFunction& f, std::span<const double> nodes) {
  Json j;
  j["kind"] = to_string(f.kind());
  j["family"] = f.family();
  if (Json p = closed_form(f); !p.is_null()) j["params"] = std::move(p);
  if (f.offset() != 0.0) j["offset"] = number(f.offset());
  if (std::isfinite(f.domain_max())) j["domain_max"] = number(f.domain_max());
  Json table = Json::array();
  for (double s : clip_nodes(f, nodes)) table.push_back(Json::array({number(s), number(f(s))}));
  j["table"] = std::move(table);
  return j;
}

Json to_json(const KLBound& beta, const ExportGrid& grid) {
  Json j;
  j["family"] = beta.family();
  if (const auto* p = std::get_if<KLBound::Product>(&beta.repr())) {
    j["rate"] = number(p->rate);
    j["shift"] = number(p->shift);
  }
  j["s"] = vector(std::span<const double>(grid.s));
  j["t"] = vector(std::span<const double>(grid.t));
  Json rows = Json::array();
  for (double s : grid.s) {
    Json row = Json::array();
    for (double t : grid.t) row.push_back(number(beta(s, t)));
    rows.push_back(std::move(row));
  }
  j["values"] = std::move(rows);
  return j;
}

Json to_json(const BallPair& balls) {
  return Json{{"delta", number(balls.delta)}, {"Delta", number(balls.Delta)}};
}

Json to_json(const Counterexample& cx) {
  return Json{{"t0", number(cx.t0)},
              {"x0", vector(cx.x0)},
              {"t", number(cx.t)},
              {"margin", number(cx.margin)},
              {"reason", cx.reason}};
}

Json to_json(const IntegratorInfo& info) {
  Json j{{"method", info.method}};
  if (info.method == "rk4") {
    j["h"] = number(info.h);
  } else {
    j["rtol"] = number(info.rtol);
    j["atol"] = number(info.atol);
  }
  return j;
}

Json to_json(const StabilityVerdict& v, const ExportGrid& grid) {
  Json j;
  j["property"] = to_string(v.property);
  j["holds"] = v.holds;
  j["note"] = v.note;
  j["balls"] = to_json(v.balls);
  Json conf;
  conf["samples"] = v.samples;
  conf["failed_integrations"] = v.failed_integrations;
  conf["seed"] = v.seed ? Json(*v.seed) : Json(nullptr);
  conf["probed_t0"] = vector(std::span<const double>(v.probed_t0));
  conf["tail_tol"] = number(v.tail_tol);
  j["confidence"] = std::move(conf);
  if (v.eta) j["eta"] = to_json(*v.eta, grid.s);
  if (v.sigma) j["sigma"] = to_json(*v.sigma, grid.t);
  if (v.gamma) j["gamma"] = to_json(*v.gamma, grid.s);
  if (v.mu) j["mu"] = number(*v.mu);
  if (v.beta) j["beta"] = to_json(*v.beta, grid);
  if (v.violations > 0 || std::isfinite(v.worst_margin)) {
    j["violations"] = v.violations;
    j["worst_margin"] = number(v.worst_margin);
  }
  if (v.counterexample) j["counterexample"] = to_json(*v.counterexample);
  if (!v.schedule.empty()) {
    Json rows = Json::array();
    for (const auto& e : v.schedule)
      rows.push_back(Json{{"balls", to_json(e.balls)}, {"theta", vector(e.theta)},
                          {"holds", e.holds}});
    j["schedule"] = std::move(rows);
  }
  return j;
}

Json to_json(const SynthesizedEstimate& est, const ExportGrid& grid) {
  Json j;
  j["variant"] = est.usas_variant ? "usas" : "standard";
  j["delta"] = number(est.delta);
  j["Delta"] = number(est.Delta);
  j["delta3"] = number(est.delta3);
  j["delta4"] = number(est.delta4);
  j["t1"] = number(est.t1);
  j["t2"] = number(est.t2);
  const auto& a = est.audit;
  j["audit"] = Json{{"delta1", number(a.delta1)},     {"Delta1", number(a.Delta1)},
                    {"delta2", number(a.delta2)},     {"Delta2", number(a.Delta2)},
                    {"k1", number(a.k1)},             {"c1_Delta1", number(a.c1_Delta1)},
                    {"G_Delta1", number(a.G_Delta1)}, {"gamma", number(a.gamma)},
                    {"Delta0", number(a.Delta0)}};
  if (est.c3) j["c3"] = to_json(*est.c3, grid.s);
  if (est.eta) j["eta"] = to_json(*est.eta, grid.s);
  if (est.beta) j["beta"] = to_json(*est.beta, grid);
  return j;
}

namespace {

Json to_json(const ConditionResult& c) {
  Json j{{"name", c.name},
         {"holds", c.holds},
         {"probes", c.probes},
         {"violations", c.violations},
         {"worst_margin", number(c.worst_margin)}};
  if (c.counterexample) j["counterexample"] = report::to_json(*c.counterexample);
  return j;
}

Json to_json(const LimitSequence& s) {
  return Json{{"arguments", vector(std::span<const double>(s.arguments))},
              {"values", vector(std::span<const double>(s.values))},
              {"monotone", s.monotone},
              {"reaches_target", s.reaches_target},
              {"holds", s.holds},
              {"note", s.note}};
}

}  // namespace

Json to_json(const LyapunovUspasReport& r) {
  Json pairs = Json::array();
  for (std::size_t i = 0; i < r.pairs.size(); ++i) {
    Json p = report::to_json(r.pairs[i]);
    if (i < r.sandwich.size()) p["sandwich"] = to_json(r.sandwich[i]);
    if (i < r.decrease.size()) p["decrease"] = to_json(r.decrease[i]);
    pairs.push_back(std::move(p));
  }
  return Json{{"holds", r.holds},
              {"pairs", std::move(pairs)},
              {"condadd", to_json(r.condadd)},
              {"condadd2", to_json(r.condadd2)}};
}

Json to_json(const FalsifierReport& r) {
  Json j{{"probes", r.probes}, {"violations", r.violations}};
  auto witness = [](const NonincreaseWitness& w) {
    return Json{{"t", number(w.t)}, {"x", vector(w.x)}, {"vdot", number(w.vdot)}};
  };
  if (r.first) j["first"] = witness(*r.first);
  if (r.worst.x.size() > 0) j["worst"] = witness(r.worst);
  return j;
}

Json to_json(const PidGains& g) {
  return Json{{"k_p", number(g.k_p)},   {"k_d", number(g.k_d)},   {"k_i", number(g.k_i)},
              {"kp_prime", number(g.kp_prime())}, {"eps1", number(g.eps1)},
              {"eps2", number(g.eps2)}};
}

Json to_json(const SemiglobalResult& r) {
  return Json{{"Delta1", number(r.Delta1)},
              {"gains", to_json(r.gains)},
              {"samples", r.samples},
              {"converged", r.converged},
              {"worst_final", number(r.worst_final)},
              {"worst_hit_time", number(r.worst_hit_time)},
              {"horizon", number(r.horizon)},
              {"holds", r.samples > 0 && r.converged == r.samples}};
}

std::string function_csv(const ComparisonFunction& f, std::span<const double> nodes) {
  std::string out = "s,value\n";
  for (double s : clip_nodes(f, nodes)) {
    detail::append_number(out, s);
    out += ',';
    detail::append_number(out, f(s));
    out += '\n';
  }
  return out;
}

std::string samples_csv(std::span<const EnvelopeSample> samples) {
  std::string out = "s,value\n";
  for (const auto& p : samples) {
    detail::append_number(out, p.s);
    out += ',';
    detail::append_number(out, p.value);
    out += '\n';
  }
  return out;
}

std::string surface_csv(const KLBound& beta, const ExportGrid& grid) {
  std::string out = "s,t,value\n";
  for (double s : grid.s) {
    for (double t : grid.t) {
      detail::append_number(out, s);
      out += ',';
      detail::append_number(out, t);
      out += ',';
      detail::append_number(out, beta(s, t));
      out += '\n';
    }
  }
  return out;
}

}  // namespace uspas::report
