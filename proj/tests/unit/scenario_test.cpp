#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "uspas/errors.hpp"
#include "uspas/scenario.hpp"

namespace fs = std::filesystem;

namespace {

const char* kSimulate = R"({
  "schema_version": 1,
  "name": "decay",
  "task": "simulate",
  "seed": 4,
  "horizon": 2,
  "system": {"builtin": "linear", "dim": 2},
  "theta": [-1],
  "sampling": {"kind": "ball", "count": 3},
  "balls": {"delta": 0.1, "Delta": 1.0}
})";

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("uspas_scenario_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string error_of(const std::string& text) {
  try {
    uspas::parse_scenario(text);
  } catch (const uspas::ScenarioError& e) {
    return e.what();
  }
  return {};
}

std::string run_error_of(const std::string& text) {
  try {
    uspas::RunOptions o;
    o.out_dir = scratch("error");
    uspas::run_scenario(uspas::parse_scenario(text), o);
  } catch (const uspas::ScenarioError& e) {
    return e.what();
  }
  return {};
}

std::string with(std::string text, const std::string& from, const std::string& to) {
  text.replace(text.find(from), from.size(), to);
  return text;
}

}  // namespace

TEST(Scenario, ParsesHeader) {
  auto s = uspas::parse_scenario(kSimulate);
  EXPECT_EQ(s.name, "decay");
  EXPECT_EQ(s.task, "simulate");
  ASSERT_TRUE(s.seed);
  EXPECT_EQ(*s.seed, 4u);
}

TEST(Scenario, SyntaxErrorsCarryPosition) {
  auto msg = error_of("{\n  \"task\": \"simulate\",\n  oops\n}");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Scenario, UnknownFieldNamesPath) {
  auto msg = error_of(with(kSimulate, "\"horizon\": 2", "\"horizn\": 2"));
  EXPECT_NE(msg.find("$.horizn"), std::string::npos) << msg;
}

TEST(Scenario, RejectsOtherSchemaVersions) {
  auto msg = error_of(with(kSimulate, "\"schema_version\": 1", "\"schema_version\": 2"));
  EXPECT_NE(msg.find("$.schema_version"), std::string::npos) << msg;
}

TEST(Scenario, RejectsUnknownTask) {
  auto msg = error_of(with(kSimulate, "\"simulate\"", "\"juggle\""));
  EXPECT_NE(msg.find("$.task"), std::string::npos) << msg;
}

TEST(Scenario, NestedErrorsNamePath) {
  auto msg = run_error_of(with(kSimulate, "\"count\": 3", "\"count\": -3"));
  EXPECT_NE(msg.find("$.sampling.count"), std::string::npos) << msg;
  msg = run_error_of(with(kSimulate, "\"theta\": [-1]", "\"theta\": [-1, 2]"));
  EXPECT_NE(msg.find("$.theta"), std::string::npos) << msg;
}

TEST(Scenario, SamplingNeedsSeed) {
  auto msg = run_error_of(with(kSimulate, "\"seed\": 4,", ""));
  EXPECT_NE(msg.find("$.seed"), std::string::npos) << msg;
}

TEST(Scenario, SimulateWritesArtifacts) {
  uspas::RunOptions o;
  o.out_dir = scratch("simulate");
  o.canonical = true;
  auto r = uspas::run_scenario(uspas::parse_scenario(kSimulate), o);
  EXPECT_EQ(r.exit_code, 0);
  ASSERT_TRUE(fs::exists(o.out_dir / "report.json"));
  EXPECT_TRUE(fs::exists(o.out_dir / "trajectories" / "traj_0000.csv"));
  EXPECT_TRUE(fs::is_directory(o.out_dir / "envelopes"));
  auto report = nlohmann::json::parse(read_file(o.out_dir / "report.json"));
  EXPECT_EQ(report["status"], "holds");
  EXPECT_FALSE(report.contains("run"));
}

TEST(Scenario, CanonicalReportsAreByteIdentical) {
  uspas::RunOptions a, b;
  a.out_dir = scratch("canon_a");
  b.out_dir = scratch("canon_b");
  a.canonical = b.canonical = true;
  b.threads = 3;
  auto s = uspas::parse_scenario(kSimulate);
  uspas::run_scenario(s, a);
  uspas::run_scenario(s, b);
  EXPECT_EQ(read_file(a.out_dir / "report.json"), read_file(b.out_dir / "report.json"));
  EXPECT_EQ(read_file(a.out_dir / "trajectories" / "traj_0002.csv"),
            read_file(b.out_dir / "trajectories" / "traj_0002.csv"));
}

TEST(Scenario, SeedOverrideChangesSamples) {
  uspas::RunOptions a, b;
  a.out_dir = scratch("seed_a");
  b.out_dir = scratch("seed_b");
  a.canonical = b.canonical = true;
  b.seed = 99;
  auto s = uspas::parse_scenario(kSimulate);
  uspas::run_scenario(s, a);
  uspas::run_scenario(s, b);
  EXPECT_NE(read_file(a.out_dir / "trajectories" / "traj_0000.csv"),
            read_file(b.out_dir / "trajectories" / "traj_0000.csv"));
  auto report = nlohmann::json::parse(read_file(b.out_dir / "report.json"));
  EXPECT_EQ(report["scenario"]["seed"], 99);
}

TEST(Scenario, FalsifiedCheckExitsTwo) {
  uspas::RunOptions o;
  o.out_dir = scratch("falsified");
  o.canonical = true;
  auto s = uspas::load_scenario(fs::path(USPAS_SCENARIO_DIR) / "unstable_linear.json");
  auto r = uspas::run_scenario(s, o);
  EXPECT_EQ(r.exit_code, 2);
  auto report = nlohmann::json::parse(read_file(o.out_dir / "report.json"));
  EXPECT_FALSE(report["result"]["verdict"]["counterexample"].is_null());
}

TEST(Scenario, BundledScenariosParse) {
  for (const auto& entry : fs::directory_iterator(USPAS_SCENARIO_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(uspas::load_scenario(entry.path())) << entry.path();
  }
}

TEST(Scenario, MissingFileIsScenarioError) {
  EXPECT_THROW(uspas::load_scenario("/nonexistent/scenario.json"), uspas::ScenarioError);
}
