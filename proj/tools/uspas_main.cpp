// uspas: run scenario files.
//
//   uspas run scenarios/linear_cascade.json --out out/ --seed 7 --canonical
//
// Exit status: 0 when every asserted property holds, 2 when one is
// falsified, 1 on any execution or schema error.

#include <cstdint>
#include <iostream>
#include <string>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "uspas/errors.hpp"
#include "uspas/parallel.hpp"
#include "uspas/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stability checks and cascade bound synthesis for parameterized ODEs"};
  app.set_version_flag("--version", std::string(uspas::version()));
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a scenario file");
  std::string file;
  std::string out = "uspas-out";
  std::uint64_t seed = 0;
  int threads = 0;
  bool canonical = false;
  run->add_option("file", file, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory")->capture_default_str();
  auto* seed_opt = run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--threads", threads,
                  "Worker threads (default: USPAS_THREADS or hardware concurrency)")
      ->check(CLI::NonNegativeNumber);
  run->add_flag("--canonical", canonical, "Omit timestamps and durations from report.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (threads > 0) uspas::set_default_thread_count(threads);
    uspas::RunOptions opts;
    opts.out_dir = out;
    if (seed_opt->count() > 0) opts.seed = seed;
    opts.threads = threads;
    opts.canonical = canonical;
    const auto scenario = uspas::load_scenario(file);
    const auto result = uspas::run_scenario(scenario, opts);
    std::cout << result.summary << '\n' << "report: " << result.report_path.string() << '\n';
    return result.exit_code;
  } catch (const uspas::ScenarioError& e) {
    std::cerr << "uspas: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "uspas: error: " << e.what() << '\n';
    return 1;
  }
}
