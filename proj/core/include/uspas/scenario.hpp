#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace uspas {

const char* version();

inline constexpr int kScenarioSchemaVersion = 1;

/// A parsed scenario file. Only the header fields are decoded eagerly; task
/// blocks are validated when the scenario runs, with field paths such as
/// `$.sampling.count` in every diagnostic.
struct Scenario {
  std::string name;
  std::string task;
  std::optional<std::uint64_t> seed;
  std::filesystem::path source;  ///< file the scenario came from (for relative paths)
  nlohmann::json document;
};

/// Throws ScenarioError with line/column for syntax errors and a field path
/// for schema errors.
Scenario parse_scenario(const std::string& text, const std::filesystem::path& source = {});
Scenario load_scenario(const std::filesystem::path& path);

struct RunOptions {
  std::filesystem::path out_dir = "uspas-out";
  std::optional<std::uint64_t> seed;  ///< overrides the scenario seed
  int threads = 0;
  /// Omit wall-clock fields so reruns are byte-identical.
  bool canonical = false;
};

struct RunResult {
  /// 0: every asserted property holds, 2: something was falsified.
  int exit_code = 0;
  std::string summary;
  std::filesystem::path report_path;
};

/// Runs the task and writes report.json, trajectories/*.csv and
/// envelopes/*.csv under out_dir. Execution errors propagate as exceptions.
RunResult run_scenario(const Scenario& scenario, const RunOptions& options);

}  // namespace uspas
