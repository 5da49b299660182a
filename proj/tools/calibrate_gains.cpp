// Calibrates the PID gain schedule for the two-link arm.
//
// Gains are k = scale * (a + b * Delta1) for a fixed shape (a, b). For each
// Delta1 level the decrease condition V1' <= target is audited on random
// states in B_Delta1; the smallest passing scale is found by bisection and
// multiplied by a safety factor.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uspas/robotlab.hpp"

namespace {

struct Config {
  std::vector<double> levels{1.0, 5.0, 10.0};
  std::size_t samples = 4000;
  std::uint64_t seed = 11;
  double safety = 1.5;
  std::string out = "robot_gain_schedule.json";
  uspas::GainSchedule shape{1.0, 1.0, 1.0, 1.0, 0.25, 0.25};
};

uspas::RobotSetup make_setup(double Delta1, const uspas::GainSchedule& s) {
  uspas::RobotSetup setup;
  setup.model = uspas::two_link_arm();
  setup.q_star = uspas::Vector(2);
  setup.q_star << std::numbers::pi / 4.0, std::numbers::pi / 6.0;
  setup.gains = uspas::gain_schedule(Delta1, s);
  setup.g_hat = uspas::default_gravity_guess(setup.model, setup.q_star);
  return setup;
}

uspas::GainSchedule scaled(const uspas::GainSchedule& s, double k) {
  return {k * s.a_d, k * s.b_d, k * s.a_p, k * s.b_p, k * s.a_i, k * s.b_i};
}

bool passes(const Config& cfg, double scale, std::uint64_t seed, std::size_t samples) {
  const auto sched = scaled(cfg.shape, scale);
  for (std::size_t i = 0; i < cfg.levels.size(); ++i) {
    const auto setup = make_setup(cfg.levels[i], sched);
    try {
      setup.gains.validate();
    } catch (const std::exception&) {
      return false;
    }
    if (uspas::audit_decrease(setup, cfg.levels[i], samples, seed + i).violations > 0)
      return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  Config cfg;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto next = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << a << " needs a value\n";
        std::exit(1);
      }
      return argv[++i];
    };
    if (a == "--out") cfg.out = next();
    else if (a == "--samples") cfg.samples = std::stoul(next());
    else if (a == "--seed") cfg.seed = std::stoull(next());
    else if (a == "--safety") cfg.safety = std::stod(next());
    else if (a == "--shape") {
      // a_d,b_d,a_p,b_p,a_i,b_i
      auto& s = cfg.shape;
      if (std::sscanf(next().c_str(), "%lf,%lf,%lf,%lf,%lf,%lf", &s.a_d, &s.b_d, &s.a_p, &s.b_p,
                      &s.a_i, &s.b_i) != 6) {
        std::cerr << "--shape expects six comma-separated numbers\n";
        return 1;
      }
    } else {
      std::cerr << "usage: uspas_calibrate [--out file] [--samples n] [--seed s] "
                   "[--safety f] [--shape a_d,b_d,a_p,b_p,a_i,b_i]\n";
      return 1;
    }
  }

  double hi = 1.0;
  while (!passes(cfg, hi, cfg.seed, cfg.samples)) {
    hi *= 2.0;
    if (hi > 1e6) {
      std::cerr << "no passing scale below 1e6 for this shape\n";
      return 2;
    }
  }
  double lo = hi / 2.0;
  if (passes(cfg, lo, cfg.seed, cfg.samples)) lo = 0.0;
  for (int it = 0; it < 30 && hi - lo > 1e-3 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (passes(cfg, mid, cfg.seed, cfg.samples) ? hi : lo) = mid;
  }
  const double scale = cfg.safety * hi;
  const auto sched = scaled(cfg.shape, scale);
  std::cout << "minimal scale " << hi << ", calibrated scale " << scale << '\n';

  const auto model = uspas::two_link_arm();
  nlohmann::ordered_json audits = nlohmann::ordered_json::array();
  bool ok = true;
  for (std::size_t i = 0; i < cfg.levels.size(); ++i) {
    const double D1 = cfg.levels[i];
    const auto setup = make_setup(D1, sched);
    const auto a = uspas::audit_decrease(setup, D1, 4 * cfg.samples, cfg.seed + 100 + i);
    ok = ok && a.violations == 0;
    std::cout << "Delta1=" << D1 << " kd=" << setup.gains.k_d
              << " kp'=" << setup.gains.kp_prime() << " ki=" << setup.gains.k_i
              << " violations=" << a.violations << "/" << a.probes
              << " worst_ratio=" << a.worst_ratio << '\n';
    audits.push_back({{"Delta1", D1},
                      {"k_d", setup.gains.k_d},
                      {"kp_prime", setup.gains.kp_prime()},
                      {"k_i", setup.gains.k_i},
                      {"eps1", setup.gains.eps1},
                      {"probes", a.probes},
                      {"violations", a.violations},
                      {"worst_ratio", a.worst_ratio}});
  }

  nlohmann::ordered_json j;
  j["schedule"] = {{"a_d", sched.a_d}, {"b_d", sched.b_d}, {"a_p", sched.a_p},
                   {"b_p", sched.b_p}, {"a_i", sched.a_i}, {"b_i", sched.b_i}};
  j["calibration"] = {
      {"model", model.name},
      {"q_star", {std::numbers::pi / 4.0, std::numbers::pi / 6.0}},
      {"constants", {{"d_m", model.d_m}, {"d_M", model.d_M}, {"k_c", model.k_c}, {"k_g", model.k_g}}},
      {"shape",
       {{"a_d", cfg.shape.a_d}, {"b_d", cfg.shape.b_d}, {"a_p", cfg.shape.a_p},
        {"b_p", cfg.shape.b_p}, {"a_i", cfg.shape.a_i}, {"b_i", cfg.shape.b_i}}},
      {"minimal_scale", hi},
      {"safety", cfg.safety},
      {"samples", cfg.samples},
      {"seed", cfg.seed},
      {"audits", audits}};
  std::ofstream(cfg.out) << j.dump(2) << '\n';
  std::cout << "wrote " << cfg.out << '\n';
  return ok ? 0 : 2;
}
