#include "uspas/scenario.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "uspas/builtins.hpp"
#include "uspas/errors.hpp"
#include "uspas/parallel.hpp"
#include "uspas/report.hpp"
#include "uspas/robotlab.hpp"

#ifndef USPAS_VERSION
#define USPAS_VERSION "0.0.0"
#endif

namespace uspas {

const char* version() { return USPAS_VERSION; }

namespace {

using nlohmann::json;
using report::Json;
namespace fs = std::filesystem;

// -- field access with path diagnostics -------------------------------------

class Field {
 public:
  Field(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const std::string& path() const { return path_; }
  const json& raw() const { return *j_; }

  [[noreturn]] void fail(const std::string& msg) const { throw ScenarioError(path_ + ": " + msg); }

  bool has(const char* key) const { return j_->is_object() && j_->contains(key); }

  Field at(const char* key) const {
    require_object();
    auto it = j_->find(key);
    if (it == j_->end()) throw ScenarioError(path_ + "." + key + ": required field is missing");
    return Field(*it, path_ + "." + key);
  }

  std::optional<Field> opt(const char* key) const {
    require_object();
    auto it = j_->find(key);
    if (it == j_->end() || it->is_null()) return std::nullopt;
    return Field(*it, path_ + "." + key);
  }

  void require_object() const {
    if (!j_->is_object()) fail("expected an object");
  }

  void allow_only(std::initializer_list<const char*> keys) const {
    require_object();
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!allowed.count(it.key())) throw ScenarioError(path_ + "." + it.key() + ": unknown field");
  }

  double number() const {
    if (j_->is_number()) return j_->get<double>();
    if (j_->is_string()) {
      const auto s = j_->get<std::string>();
      if (s == "inf") return kInfinity;
    }
    fail("expected a number");
  }
  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("expected a positive number");
    return v;
  }
  double nonneg() const {
    const double v = number();
    if (!(v >= 0.0)) fail("expected a nonnegative number");
    return v;
  }
  std::uint64_t u64() const {
    if (j_->is_number_unsigned()) return j_->get<std::uint64_t>();
    if (j_->is_number_integer() && j_->get<std::int64_t>() >= 0)
      return static_cast<std::uint64_t>(j_->get<std::int64_t>());
    fail("expected a nonnegative integer");
  }
  int count() const {
    const auto v = u64();
    if (v == 0 || v > 100'000'000) fail("expected an integer in [1, 1e8]");
    return static_cast<int>(v);
  }
  std::string str() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }
  bool boolean() const {
    if (!j_->is_boolean()) fail("expected true or false");
    return j_->get<bool>();
  }
  std::vector<Field> items() const {
    if (!j_->is_array()) fail("expected an array");
    std::vector<Field> out;
    for (std::size_t i = 0; i < j_->size(); ++i)
      out.emplace_back((*j_)[i], path_ + "[" + std::to_string(i) + "]");
    return out;
  }
  std::vector<double> numbers() const {
    std::vector<double> out;
    for (const auto& f : items()) out.push_back(f.number());
    return out;
  }
  Vector vec(int expected_size = -1) const {
    const auto v = numbers();
    if (expected_size >= 0 && static_cast<int>(v.size()) != expected_size)
      fail("expected " + std::to_string(expected_size) + " entries, got " +
           std::to_string(v.size()));
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  double number_or(const char* key, double fallback) const {
    auto f = opt(key);
    return f ? f->number() : fallback;
  }
  double positive_or(const char* key, double fallback) const {
    auto f = opt(key);
    return f ? f->positive() : fallback;
  }
  int count_or(const char* key, int fallback) const {
    auto f = opt(key);
    return f ? f->count() : fallback;
  }
  std::string str_or(const char* key, std::string fallback) const {
    auto f = opt(key);
    return f ? f->str() : fallback;
  }

 private:
  const json* j_;
  std::string path_;
};

// -- comparison functions and KL bounds from the file ------------------------

Kind parse_kind(const Field& f) {
  const auto s = f.str();
  if (s == "K") return Kind::K;
  if (s == "Kinf") return Kind::Kinf;
  if (s == "L") return Kind::L;
  f.fail("expected one of K, Kinf, L");
}

ComparisonFunction parse_function(const Field& f) {
  const auto family = f.at("family").str();
  try {
    if (family == "linear") return ComparisonFunction::linear(f.at("a").positive());
    if (family == "power")
      return ComparisonFunction::power(f.at("a").positive(), f.at("p").positive());
    if (family == "saturating_exp")
      return ComparisonFunction::saturating_exp(f.at("a").positive(), f.at("lambda").positive());
    if (family == "exp_decay")
      return ComparisonFunction::exp_decay(f.at("a").nonneg(), f.at("lambda").positive(),
                                           f.number_or("b", 0.0));
    if (family == "constant") return ComparisonFunction::constant(f.at("c").nonneg());
    if (family == "grid") {
      const auto extrap = f.str_or("extrapolation", "tail");
      if (extrap != "tail" && extrap != "none")
        f.at("extrapolation").fail("expected \"tail\" or \"none\"");
      return ComparisonFunction::grid(parse_kind(f.at("kind")), f.at("s").numbers(),
                                      f.at("v").numbers(),
                                      extrap == "tail" ? Extrapolation::kTail
                                                       : Extrapolation::kNone);
    }
  } catch (const ScenarioError&) {
    throw;
  } catch (const Error& e) {
    f.fail(e.what());
  }
  f.at("family").fail("unknown comparison-function family \"" + family + "\"");
}

KLBound parse_kl(const Field& f) {
  const auto family = f.at("family").str();
  try {
    if (family == "product")
      return KLBound::product(parse_function(f.at("eta")), f.at("rate").positive(),
                              f.number_or("shift", 0.0));
    if (family == "min_envelope")
      return KLBound::min_envelope(parse_function(f.at("eta")), parse_function(f.at("sigma")));
    if (family == "max" || family == "min") {
      std::vector<KLBound> parts;
      for (const auto& p : f.at("parts").items()) parts.push_back(parse_kl(p));
      return family == "max" ? KLBound::max_of(std::move(parts))
                             : KLBound::min_of(std::move(parts));
    }
    if (family == "grid")
      return KLBound::grid(f.at("s").numbers(), f.at("t").numbers(), f.at("values").numbers());
  } catch (const ScenarioError&) {
    throw;
  } catch (const Error& e) {
    f.fail(e.what());
  }
  f.at("family").fail("unknown KL family \"" + family + "\"");
}

BallPair parse_balls(const Field& f) {
  f.allow_only({"delta", "Delta"});
  BallPair b{f.at("delta").nonneg(), f.at("Delta").positive()};
  if (!(b.Delta > b.delta)) f.fail("need Delta > delta");
  return b;
}

// -- systems -----------------------------------------------------------------

struct SystemSpec {
  ParameterizedSystem sys;
  Vector theta;
  Json info;
  std::optional<CascadeSystem> cascade;
};

GainSchedule parse_schedule(const Field& f, const fs::path& base) {
  if (f.raw().is_string()) {
    fs::path p = f.str();
    if (p.is_relative()) p = base / p;
    try {
      return load_gain_schedule(p.string());
    } catch (const std::exception& e) {
      f.fail(e.what());
    }
  }
  GainSchedule s;
  s.a_d = f.at("a_d").nonneg();
  s.b_d = f.at("b_d").nonneg();
  s.a_p = f.at("a_p").nonneg();
  s.b_p = f.at("b_p").nonneg();
  s.a_i = f.at("a_i").nonneg();
  s.b_i = f.at("b_i").nonneg();
  return s;
}

RobotSetup robot_setup(const Field& f, const fs::path& base, double Delta1) {
  RobotSetup setup;
  setup.model = two_link_arm();
  if (auto g = f.opt("gains")) {
    // Explicit gains; eps defaults follow the schedule rule.
    g->allow_only({"k_d", "kp_prime", "k_i", "eps1", "eps2"});
    const double eps1 = g->positive_or("eps1", schedule_eps1(Delta1));
    setup.gains = PidGains::from_prime(g->at("kp_prime").positive(), g->at("k_d").positive(),
                                       g->at("k_i").positive(), eps1,
                                       g->positive_or("eps2", eps1 / 4.0));
  } else {
    setup.gains = gain_schedule(Delta1, parse_schedule(f.at("gain_schedule"), base));
  }
  if (auto m = f.opt("motor")) {
    m->allow_only({"L", "R", "R_prime", "k_b", "k_t"});
    setup.motor.L = m->positive_or("L", setup.motor.L);
    setup.motor.R = m->positive_or("R", setup.motor.R);
    setup.motor.R_prime = m->positive_or("R_prime", setup.motor.R_prime);
    setup.motor.k_b = m->positive_or("k_b", setup.motor.k_b);
    setup.motor.k_t = m->positive_or("k_t", setup.motor.k_t);
  }
  if (auto q = f.opt("q_star")) {
    setup.q_star = q->vec(2);
  } else {
    setup.q_star = Vector(2);
    setup.q_star << std::numbers::pi / 4.0, std::numbers::pi / 6.0;
  }
  setup.g_hat = default_gravity_guess(setup.model, setup.q_star);
  try {
    setup.gains.validate();
  } catch (const Error& e) {
    f.fail(e.what());
  }
  return setup;
}

SystemSpec build_system(const Field& root, const fs::path& base) {
  const Field f = root.at("system");
  const auto name = f.at("builtin").str();
  SystemSpec out;
  Vector default_theta;
  if (name == "linear") {
    f.allow_only({"builtin", "dim"});
    out.sys = builtin::linear(f.count_or("dim", 1));
    default_theta = Vector::Constant(1, -1.0);
  } else if (name == "forced_decay") {
    f.allow_only({"builtin", "dim"});
    out.sys = builtin::forced_decay(f.count_or("dim", 1));
    default_theta = Vector(2);
    default_theta << 1.0, 1.0;
  } else if (name == "linear_cascade") {
    f.allow_only({"builtin"});
    out.cascade = builtin::linear_cascade();
    out.sys = compose_cascade(*out.cascade);
    default_theta = Vector::Ones(2);
  } else if (name == "robot_cascade") {
    f.allow_only({"builtin", "Delta1", "gain_schedule", "gains", "q_star", "motor"});
    const double Delta1 = f.at("Delta1").positive();
    const RobotSetup setup = robot_setup(f, base, Delta1);
    out.cascade = closed_loop_cascade(setup);
    out.sys = compose_cascade(*out.cascade);
    default_theta = cascade_theta(setup);
    if (root.has("theta")) root.at("theta").fail("robot_cascade derives theta from the gains");
  } else {
    f.at("builtin").fail("unknown builtin system \"" + name +
                         "\" (linear, forced_decay, linear_cascade, robot_cascade)");
  }
  out.theta = root.has("theta") ? root.at("theta").vec(out.sys.param_dim) : default_theta;
  out.info = Json{{"builtin", name}, {"name", out.sys.name}, {"dim", out.sys.dim},
                  {"param_dim", out.sys.param_dim}};
  return out;
}

// -- sampling and integration ------------------------------------------------

IntegrateOptions parse_integrator(const Field& root) {
  IntegrateOptions opts;
  auto f = root.opt("integrator");
  if (!f) return opts;
  f->allow_only({"method", "h", "rtol", "atol", "max_output_step", "escape_threshold"});
  const auto method = f->str_or("method", "rk45");
  if (method == "rk45") {
    opts.method = Rk45{f->positive_or("rtol", 1e-8), f->positive_or("atol", 1e-10)};
  } else if (method == "rk4") {
    opts.method = Rk4{f->at("h").positive()};
  } else {
    f->at("method").fail("expected \"rk45\" or \"rk4\"");
  }
  if (auto m = f->opt("max_output_step")) opts.max_output_step = m->positive();
  if (auto e = f->opt("escape_threshold")) opts.escape_threshold = e->positive();
  return opts;
}

struct SamplingPlan {
  std::optional<Field> field;
  double horizon = 0.0;
  std::optional<std::uint64_t> seed;
};

std::vector<double> t0_list(const SamplingPlan& plan) {
  if (plan.field) {
    if (auto t = plan.field->opt("t0")) return t->numbers();
  }
  return default_t0_probes(plan.horizon);
}

std::uint64_t need_seed(const SamplingPlan& plan) {
  if (!plan.seed) throw ScenarioError("$.seed: required for sampling tasks");
  return *plan.seed;
}

InitialConditionSampler make_sampler(const SamplingPlan& plan, int dim, double radius) {
  const std::string kind = plan.field ? plan.field->str_or("kind", "shells") : "shells";
  if (plan.field)
    plan.field->allow_only({"kind", "directions", "radii", "inner_fraction", "t0", "count",
                            "radius", "points"});
  if (plan.field) {
    if (auto r = plan.field->opt("radius")) radius = r->positive();
  }
  if (kind == "list") {
    std::vector<InitialCondition> samples;
    for (const auto& p : plan.field->at("points").items())
      samples.push_back({p.number_or("t0", 0.0), p.at("x0").vec(dim)});
    return InitialConditionSampler::from_list(std::move(samples));
  }
  if (!std::isfinite(radius) || !(radius > 0.0))
    throw ScenarioError((plan.field ? plan.field->path() : std::string("$.sampling")) +
                        ": a finite sampling radius is required (set sampling.radius)");
  const auto seed = need_seed(plan);
  if (kind == "shells") {
    ShellPlan sp;
    if (plan.field) {
      sp.directions = plan.field->count_or("directions", sp.directions);
      sp.radii = plan.field->count_or("radii", sp.radii);
      sp.inner_fraction = plan.field->positive_or("inner_fraction", sp.inner_fraction);
    }
    sp.t0_probes = t0_list(plan);
    return InitialConditionSampler::shells(dim, radius, plan.horizon, sp, seed);
  }
  if (kind == "ball" || kind == "sphere") {
    const int count = plan.field->at("count").count();
    return kind == "ball"
               ? InitialConditionSampler::uniform_ball(dim, radius, count, t0_list(plan), seed)
               : InitialConditionSampler::sphere(dim, radius, count, t0_list(plan), seed);
  }
  plan.field->at("kind").fail("expected shells, ball, sphere or list");
}

// -- run context -------------------------------------------------------------

struct Context {
  const Scenario& scenario;
  const RunOptions& options;
  Field root;
  fs::path base;
  fs::path out;
  std::optional<std::uint64_t> seed;
  double horizon = 0.0;
  IntegrateOptions integrate;
  Json artifacts = Json{{"trajectories", Json::array()}, {"envelopes", Json::array()}};

  SamplingPlan plan() const { return {root.opt("sampling"), horizon, seed}; }

  CheckOptions check_options() const {
    CheckOptions c;
    c.integrate = integrate;
    c.threads = options.threads;
    c.seed = seed;
    if (auto t = root.opt("tail_tol")) c.tail_tol = t->positive();
    return c;
  }

  int export_count(int fallback) const {
    if (auto e = root.opt("export")) {
      e->allow_only({"trajectories"});
      if (auto t = e->opt("trajectories")) return static_cast<int>(t->u64());
    }
    return fallback;
  }

  void write(const fs::path& rel, const std::string& content, const char* group) {
    const fs::path full = out / rel;
    fs::create_directories(full.parent_path());
    std::ofstream f(full, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + full.string());
    f << content;
    artifacts[group].push_back(rel.generic_string());
  }

  void write_trajectory(const std::string& stem, const Trajectory& tr) {
    write(fs::path("trajectories") / (stem + ".csv"), trajectory_csv(tr), "trajectories");
  }

  void export_trajectories(const ParameterizedSystem& sys, const InitialConditionSampler& s,
                           const Vector& theta, int count) {
    const auto& samples = s.samples();
    const std::size_t n = std::min<std::size_t>(samples.size(), static_cast<std::size_t>(count));
    std::vector<Trajectory> trajs(n);
    parallel_for(
        n,
        [&](std::size_t i) {
          trajs[i] = integrate_recorded(sys, samples[i].t0, samples[i].x0, theta, horizon,
                                        integrate);
        },
        options.threads);
    for (std::size_t i = 0; i < n; ++i) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "traj_%04zu", i);
      write_trajectory(stem, trajs[i]);
    }
  }

  void export_function(const std::string& stem, const ComparisonFunction& f,
                       std::span<const double> nodes) {
    write(fs::path("envelopes") / (stem + ".csv"), report::function_csv(f, nodes), "envelopes");
  }

  void export_verdict(const StabilityVerdict& v, const report::ExportGrid& grid) {
    if (v.eta) export_function("eta", *v.eta, grid.s);
    if (v.sigma) export_function("sigma", *v.sigma, grid.t);
    if (v.gamma) export_function("gamma", *v.gamma, grid.s);
    if (v.beta)
      write("envelopes/beta.csv", report::surface_csv(*v.beta, grid), "envelopes");
    if (!v.us_data.empty())
      write("envelopes/us_samples.csv", report::samples_csv(v.us_data), "envelopes");
    if (!v.ua_data.empty())
      write("envelopes/ua_samples.csv", report::samples_csv(v.ua_data), "envelopes");
  }
};

struct TaskOutcome {
  bool holds = true;
  Json result;
  std::string summary;
  Vector theta;
  Json system = nullptr;
};

double sampled_radius(const InitialConditionSampler& s) {
  double r = 0.0;
  for (const auto& ic : s.samples()) r = std::max(r, ic.x0.norm());
  return r;
}

std::string verdict_summary(const StabilityVerdict& v) {
  std::ostringstream msg;
  msg << to_string(v.property) << (v.holds ? " holds" : " falsified") << " on " << v.samples
      << " samples";
  if (!v.note.empty()) msg << " (" << v.note << ")";
  return msg.str();
}

// -- tasks -------------------------------------------------------------------

TaskOutcome task_simulate(Context& ctx) {
  const SystemSpec spec = build_system(ctx.root, ctx.base);
  double radius = 1.0;
  if (auto b = ctx.root.opt("balls")) radius = parse_balls(*b).Delta;
  const auto sampler = make_sampler(ctx.plan(), spec.sys.dim, radius);
  const auto trajs = ensemble(spec.sys, sampler, spec.theta, ctx.horizon, ctx.integrate,
                              ctx.options.threads);
  const int limit = ctx.export_count(static_cast<int>(trajs.size()));
  Json failures = Json::array();
  double worst_final = 0.0;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const auto& tr = trajs[i];
    if (static_cast<int>(i) < limit) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "traj_%04zu", i);
      ctx.write_trajectory(stem, tr);
    }
    if (!tr.ok()) {
      failures.push_back(Json{{"index", i},
                              {"kind", to_string(tr.failure->kind)},
                              {"time", report::number(tr.failure->time)},
                              {"message", tr.failure->message}});
    } else {
      worst_final = std::max(worst_final, tr.final_state().norm());
    }
  }
  TaskOutcome o;
  o.theta = spec.theta;
  o.system = spec.info;
  o.holds = failures.empty();
  o.result = Json{{"trajectories", trajs.size()},
                  {"failed", failures.size()},
                  {"largest_final_norm", report::number(worst_final)},
                  {"failures", std::move(failures)}};
  o.summary = std::to_string(trajs.size()) + " trajectories, " +
              std::to_string(o.result["failed"].get<std::size_t>()) + " failed";
  return o;
}

TaskOutcome task_check(Context& ctx, Property property) {
  const SystemSpec spec = build_system(ctx.root, ctx.base);
  const auto opts = ctx.check_options();
  StabilityVerdict v;
  std::optional<InitialConditionSampler> sampler;
  double s_max = 1.0;
  if (property == Property::UB) {
    const double radius = ctx.root.at("radius").positive();
    sampler = make_sampler(ctx.plan(), spec.sys.dim, radius);
    v = check_UB(spec.sys, spec.theta, radius, *sampler, ctx.horizon, opts);
    s_max = radius;
  } else {
    const BallPair balls = parse_balls(ctx.root.at("balls"));
    sampler = make_sampler(ctx.plan(), spec.sys.dim, balls.Delta);
    s_max = std::isfinite(balls.Delta) ? balls.Delta : sampled_radius(*sampler);
    if (property == Property::US)
      v = check_US(spec.sys, spec.theta, balls, *sampler, ctx.horizon, opts);
    if (property == Property::UA)
      v = check_UA(spec.sys, spec.theta, balls, *sampler, ctx.horizon, opts);
    if (property == Property::UAS)
      v = check_UAS(spec.sys, spec.theta, balls, *sampler, ctx.horizon, opts);
  }
  const auto grid = report::make_export_grid(s_max, ctx.horizon);
  ctx.export_trajectories(spec.sys, *sampler, spec.theta, ctx.export_count(4));
  ctx.export_verdict(v, grid);
  TaskOutcome o;
  o.theta = spec.theta;
  o.system = spec.info;
  o.holds = v.holds;
  o.result = Json{{"verdict", report::to_json(v, grid)}};
  o.summary = verdict_summary(v);
  return o;
}

std::vector<Vector> parse_param_grid(const Field& f, int param_dim) {
  f.allow_only({"points", "axes"});
  std::vector<Vector> grid;
  if (auto pts = f.opt("points")) {
    for (const auto& p : pts->items()) grid.push_back(p.vec(param_dim));
  } else {
    const auto axes_f = f.at("axes").items();
    if (static_cast<int>(axes_f.size()) != param_dim)
      f.at("axes").fail("expected one axis per parameter (" + std::to_string(param_dim) + ")");
    std::vector<std::vector<double>> axes;
    for (const auto& a : axes_f) {
      axes.push_back(a.numbers());
      if (axes.back().empty()) a.fail("axis is empty");
    }
    // Cartesian product, last axis fastest.
    std::vector<std::size_t> idx(axes.size(), 0);
    while (true) {
      Vector th(param_dim);
      for (int i = 0; i < param_dim; ++i) th[i] = axes[i][idx[i]];
      grid.push_back(th);
      int k = param_dim - 1;
      while (k >= 0 && ++idx[k] == axes[k].size()) idx[k--] = 0;
      if (k < 0) break;
    }
  }
  if (grid.empty()) f.fail("parameter grid is empty");
  return grid;
}

TaskOutcome task_dset(Context& ctx) {
  const SystemSpec spec = build_system(ctx.root, ctx.base);
  const BallPair balls = parse_balls(ctx.root.at("balls"));
  const auto grid = parse_param_grid(ctx.root.at("param_grid"), spec.sys.param_dim);
  const auto expect = ctx.root.str_or("expect", "nonempty");
  if (expect != "nonempty" && expect != "all")
    ctx.root.at("expect").fail("expected \"nonempty\" or \"all\"");
  const auto sampler = make_sampler(ctx.plan(), spec.sys.dim, balls.Delta);
  const auto est =
      estimate_dset(spec.sys, balls, grid, sampler, ctx.horizon, ctx.check_options());
  Json entries = Json::array();
  for (const auto& e : est.entries) {
    Json row{{"theta", report::vector(e.theta)},
             {"holds", e.verdict.holds},
             {"note", e.verdict.note}};
    if (e.verdict.counterexample) row["counterexample"] = report::to_json(*e.verdict.counterexample);
    entries.push_back(std::move(row));
  }
  Json passing = Json::array();
  for (const auto& th : est.passing) passing.push_back(report::vector(th));
  TaskOutcome o;
  o.theta = spec.theta;
  o.system = spec.info;
  o.holds = expect == "all" ? est.passing.size() == est.entries.size() : !est.passing.empty();
  o.result = Json{{"balls", report::to_json(balls)},
                  {"expect", expect},
                  {"probed", est.entries.size()},
                  {"passing_count", est.passing.size()},
                  {"passing", std::move(passing)},
                  {"entries", std::move(entries)}};
  o.summary = std::to_string(est.passing.size()) + " of " + std::to_string(est.entries.size()) +
              " parameters certified";
  return o;
}

TaskOutcome task_uspas(Context& ctx) {
  const SystemSpec spec = build_system(ctx.root, ctx.base);
  std::vector<BallPair> schedule;
  for (const auto& row : ctx.root.at("schedule").items()) schedule.push_back(parse_balls(row));
  if (schedule.empty()) ctx.root.at("schedule").fail("schedule is empty");

  const Field oracle_f = ctx.root.at("oracle");
  const auto kind = oracle_f.at("kind").str();
  ParameterOracle oracle;
  if (kind == "table") {
    oracle_f.allow_only({"kind", "theta"});
    const auto rows = oracle_f.at("theta").items();
    if (rows.size() != schedule.size())
      oracle_f.at("theta").fail("expected one theta per schedule row");
    std::vector<std::pair<BallPair, Vector>> table;
    for (std::size_t i = 0; i < rows.size(); ++i)
      table.emplace_back(schedule[i], rows[i].vec(spec.sys.param_dim));
    oracle = [table](const BallPair& b) {
      for (const auto& [balls, th] : table)
        if (balls.delta == b.delta && balls.Delta == b.Delta) return th;
      throw ParameterSetError("no tabulated theta for this ball pair");
    };
  } else if (kind == "inverse_delta") {
    oracle_f.allow_only({"kind", "base", "scale"});
    const Vector base = oracle_f.at("base").vec(spec.sys.param_dim);
    const Vector scale = oracle_f.at("scale").vec(spec.sys.param_dim);
    for (const auto& b : schedule)
      if (!(b.delta > 0.0)) oracle_f.fail("inverse_delta needs delta > 0 in every row");
    oracle = [base, scale](const BallPair& b) -> Vector { return base + scale / b.delta; };
  } else {
    oracle_f.at("kind").fail("expected \"table\" or \"inverse_delta\"");
  }

  ParameterSet set;
  if (auto ps = ctx.root.opt("parameter_set")) {
    ps->allow_only({"lower", "upper"});
    const Vector lo = ps->at("lower").vec(spec.sys.param_dim);
    const Vector hi = ps->at("upper").vec(spec.sys.param_dim);
    set = [lo, hi](const Vector& th) {
      return (th.array() >= lo.array()).all() && (th.array() <= hi.array()).all();
    };
  }

  const SamplingPlan plan = ctx.plan();
  const int dim = spec.sys.dim;
  const SamplerFactory factory = [plan, dim](const BallPair& b) {
    return make_sampler(plan, dim, b.Delta);
  };
  const auto v =
      check_USPAS(spec.sys, oracle, schedule, factory, ctx.horizon, ctx.check_options(), set);
  const auto grid = report::make_export_grid(schedule.back().Delta, ctx.horizon);
  const Vector first_theta = oracle(schedule.front());
  ctx.export_trajectories(spec.sys, factory(schedule.front()), first_theta, ctx.export_count(4));
  TaskOutcome o;
  o.theta = first_theta;
  o.system = spec.info;
  o.holds = v.holds;
  o.result = Json{{"verdict", report::to_json(v, grid)}};
  o.summary = verdict_summary(v);
  return o;
}

TaskOutcome task_synthesize(Context& ctx) {
  const SystemSpec spec = build_system(ctx.root, ctx.base);
  if (spec.info["builtin"] != "linear_cascade")
    ctx.root.at("system").at("builtin").fail(
        "synthesize has bundled certificates for linear_cascade only");
  const Field s = ctx.root.at("synthesis");
  s.allow_only({"delta1", "Delta1", "delta2", "Delta2", "variant", "validate"});
  const BallPair b1{s.at("delta1").nonneg(), s.at("Delta1").positive()};
  const BallPair b2{s.at("delta2").nonneg(), s.at("Delta2").positive()};
  const auto variant = s.str_or("variant", "standard");
  if (variant != "standard" && variant != "usas")
    s.at("variant").fail("expected \"standard\" or \"usas\"");
  const bool validate = s.opt("validate") ? s.at("validate").boolean() : true;

  const auto certs = builtin::linear_cascade_certificates(spec.theta[0], spec.theta[1], b1, b2);
  const SynthesizedEstimate est =
      variant == "usas" ? usas_variant_check(certs.cert1, certs.sub2, certs.G, certs.gamma)
                        : synthesize_cascade_bound(certs.cert1, certs.sub2, certs.G, certs.gamma);

  const auto grid = report::make_export_grid(est.Delta, ctx.horizon);
  if (est.eta) ctx.export_function("eta", *est.eta, grid.s);
  if (est.c3) ctx.export_function("c3", *est.c3, grid.s);
  if (est.beta) ctx.write("envelopes/beta.csv", report::surface_csv(*est.beta, grid), "envelopes");

  TaskOutcome o;
  o.theta = spec.theta;
  o.system = spec.info;
  o.result = Json{{"estimate", report::to_json(est, grid)}};
  std::ostringstream msg;
  msg << "delta=" << est.delta << " Delta=" << est.Delta;
  if (validate) {
    const auto sampler = make_sampler(ctx.plan(), spec.sys.dim, est.Delta);
    const auto v = validate_estimate(*spec.cascade, spec.theta, est, sampler, ctx.horizon,
                                     ctx.check_options());
    ctx.export_trajectories(spec.sys, sampler, spec.theta, ctx.export_count(4));
    o.holds = v.holds;
    o.result["validation"] = report::to_json(v, grid);
    msg << "; " << v.note;
  }
  o.summary = msg.str();
  return o;
}

TaskOutcome task_validate(Context& ctx) {
  const SystemSpec spec = build_system(ctx.root, ctx.base);
  const BallPair balls = parse_balls(ctx.root.at("balls"));
  const KLBound beta = parse_kl(ctx.root.at("bound"));
  const auto sampler = make_sampler(ctx.plan(), spec.sys.dim, balls.Delta);
  const auto v = validate_bound(spec.sys, spec.theta, balls.delta, balls.Delta, beta, sampler,
                                ctx.horizon, ctx.check_options());
  const auto grid = report::make_export_grid(balls.Delta, ctx.horizon);
  ctx.export_trajectories(spec.sys, sampler, spec.theta, ctx.export_count(4));
  ctx.export_verdict(v, grid);
  TaskOutcome o;
  o.theta = spec.theta;
  o.system = spec.info;
  o.holds = v.holds;
  o.result = Json{{"verdict", report::to_json(v, grid)}};
  o.summary = verdict_summary(v);
  return o;
}

TaskOutcome task_robot_demo(Context& ctx) {
  const Field r = ctx.root.at("robot");
  r.allow_only({"Delta1", "radius_fraction", "count", "threshold", "gain_schedule", "q_star",
                "audit_samples", "horizon_scale", "motor", "gains"});
  // Integral action converges no faster than eps1, so horizons may scale with 1/eps1.
  const double horizon_scale = r.number_or("horizon_scale", 0.0);
  const auto levels = r.at("Delta1").numbers();
  if (levels.empty()) r.at("Delta1").fail("expected at least one radius");
  const double fraction = r.positive_or("radius_fraction", 0.9);
  const int count = r.count_or("count", 200);
  const double threshold = r.positive_or("threshold", 1e-3);
  const int audit_samples = r.count_or("audit_samples", 2000);
  if (!ctx.seed) throw ScenarioError("$.seed: required for sampling tasks");

  Json runs = Json::array();
  bool all = true;
  std::ostringstream msg;
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const double D1 = levels[k];
    if (!(D1 > 0.0)) r.at("Delta1").fail("radii must be positive");
    const RobotSetup setup = robot_setup(r, ctx.base, D1);
    const double horizon =
        horizon_scale > 0.0 ? horizon_scale / setup.gains.eps1 : ctx.horizon;
    const auto res = semiglobal_run(setup, D1, fraction * D1, count, horizon, threshold,
                                    *ctx.seed + k, ctx.integrate, ctx.options.threads);
    const auto audit = audit_decrease(setup, D1, audit_samples, *ctx.seed + 1000 + k);
    Json row = report::to_json(res);
    row["radius"] = report::number(fraction * D1);
    row["threshold"] = report::number(threshold);
    row["decrease_audit"] = Json{{"probes", audit.probes},
                                 {"violations", audit.violations},
                                 {"worst_ratio", report::number(audit.worst_ratio)},
                                 {"min_V_ratio", report::number(audit.min_V)}};
    runs.push_back(std::move(row));
    const bool ok = res.converged == res.samples && res.samples > 0;
    all = all && ok;
    msg << (k ? "; " : "") << "Delta1=" << D1 << ": " << res.converged << "/" << res.samples;

    // One representative trajectory per level.
    const auto cascade = closed_loop_cascade(setup);
    const auto sys = compose_cascade(cascade);
    const auto sampler =
        InitialConditionSampler::uniform_ball(sys.dim, fraction * D1, 1, {0.0}, *ctx.seed + k);
    const auto& ic = sampler.samples().front();
    char stem[48];
    std::snprintf(stem, sizeof stem, "robot_level_%zu", k);
    IntegrateOptions rep = ctx.integrate;
    const int n1 = cascade.n1();
    rep.stop_when = [n1, threshold](double, const Vector& x) {
      return x.head(n1).norm() <= threshold;
    };
    ctx.write_trajectory(stem, integrate_recorded(sys, ic.t0, ic.x0, cascade_theta(setup),
                                                  horizon, rep));
  }
  TaskOutcome o;
  o.holds = all;
  o.system = Json{{"builtin", "robot_cascade"}, {"name", "two_link_arm_cascade"}, {"dim", 8},
                  {"param_dim", 7}};
  o.result = Json{{"runs", std::move(runs)}};
  o.summary = msg.str();
  return o;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

const std::set<std::string> kTasks{"simulate", "check-us", "check-ua", "check-uas", "check-ub",
                                   "dset",     "uspas",    "synthesize", "validate",
                                   "robot-demo"};

}  // namespace

Scenario parse_scenario(const std::string& text, const fs::path& source) {
  const std::string label = source.empty() ? std::string("<scenario>") : source.string();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // e.what() already carries "at line L, column C".
    throw ScenarioError(label + ": " + e.what());
  }
  try {
    Field root(doc, "$");
    root.allow_only({"schema_version", "name", "description", "task", "seed", "horizon",
                     "system", "theta", "balls", "radius", "sampling", "integrator",
                     "tail_tol", "export", "param_grid", "expect", "schedule", "oracle",
                     "parameter_set", "synthesis", "bound", "robot"});
    const auto sv = root.at("schema_version").u64();
    if (sv != static_cast<std::uint64_t>(kScenarioSchemaVersion))
      root.at("schema_version").fail("unsupported schema version " + std::to_string(sv) +
                                     " (expected " + std::to_string(kScenarioSchemaVersion) + ")");
    Scenario s;
    s.task = root.at("task").str();
    if (!kTasks.count(s.task)) root.at("task").fail("unknown task \"" + s.task + "\"");
    s.name = root.str_or("name", source.empty() ? "scenario" : source.stem().string());
    if (auto seed = root.opt("seed")) s.seed = seed->u64();
    if (s.task != "robot-demo") root.at("horizon").positive();
    s.source = source;
    s.document = std::move(doc);
    return s;
  } catch (const ScenarioError& e) {
    throw ScenarioError(label + ": " + e.what());
  }
}

Scenario load_scenario(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path.string() + ": cannot open scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

RunResult run_scenario(const Scenario& scenario, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  const std::string stamp = options.canonical ? std::string() : utc_now();
  Context ctx{scenario,
              options,
              Field(scenario.document, "$"),
              scenario.source.empty() ? fs::current_path() : scenario.source.parent_path(),
              options.out_dir,
              options.seed ? options.seed : scenario.seed,
              0.0,
              IntegrateOptions{}};
  const std::string label = scenario.source.empty() ? "<scenario>" : scenario.source.string();

  TaskOutcome outcome;
  try {
    if (auto h = ctx.root.opt("horizon")) ctx.horizon = h->positive();
    if (scenario.task == "robot-demo" && !(ctx.horizon > 0.0)) ctx.horizon = 60.0;
    ctx.integrate = parse_integrator(ctx.root);
    fs::create_directories(ctx.out / "trajectories");
    fs::create_directories(ctx.out / "envelopes");

    const auto& t = scenario.task;
    if (t == "simulate") outcome = task_simulate(ctx);
    else if (t == "check-us") outcome = task_check(ctx, Property::US);
    else if (t == "check-ua") outcome = task_check(ctx, Property::UA);
    else if (t == "check-uas") outcome = task_check(ctx, Property::UAS);
    else if (t == "check-ub") outcome = task_check(ctx, Property::UB);
    else if (t == "dset") outcome = task_dset(ctx);
    else if (t == "uspas") outcome = task_uspas(ctx);
    else if (t == "synthesize") outcome = task_synthesize(ctx);
    else if (t == "validate") outcome = task_validate(ctx);
    else outcome = task_robot_demo(ctx);
  } catch (const ScenarioError& e) {
    throw ScenarioError(label + ": " + e.what());
  }

  RunResult rr;
  rr.exit_code = outcome.holds ? 0 : 2;
  rr.summary = scenario.task + ": " + outcome.summary;

  Json rep;
  rep["tool"] = "uspas";
  rep["version"] = version();
  rep["schema_version"] = kScenarioSchemaVersion;
  rep["scenario"] = Json{{"name", scenario.name},
                         {"file", scenario.source.filename().string()},
                         {"task", scenario.task},
                         {"seed", ctx.seed ? Json(*ctx.seed) : Json(nullptr)},
                         {"horizon", report::number(ctx.horizon)}};
  rep["system"] = outcome.system;
  if (outcome.theta.size() > 0) rep["theta"] = report::vector(outcome.theta);
  Json integ;
  if (const auto* rk = std::get_if<Rk45>(&ctx.integrate.method)) {
    integ = Json{{"method", "rk45"}, {"rtol", rk->rtol}, {"atol", rk->atol}};
  } else {
    integ = Json{{"method", "rk4"}, {"h", std::get<Rk4>(ctx.integrate.method).h}};
  }
  integ["escape_threshold"] = report::number(ctx.integrate.escape_threshold);
  rep["integrator"] = std::move(integ);
  rep["status"] = outcome.holds ? "holds" : "falsified";
  rep["exit_code"] = rr.exit_code;
  rep["summary"] = outcome.summary;
  rep["result"] = std::move(outcome.result);
  rep["artifacts"] = ctx.artifacts;
  if (!options.canonical) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    rep["run"] = Json{{"generated_at", stamp},
                      {"duration_seconds", secs},
                      {"threads", options.threads > 0 ? options.threads : default_thread_count()}};
  }

  rr.report_path = ctx.out / "report.json";
  std::ofstream f(rr.report_path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + rr.report_path.string());
  f << rep.dump(2) << '\n';
  return rr;
}

}  // namespace uspas
