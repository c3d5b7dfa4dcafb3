#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "coinfer/coinfer.hpp"

namespace coinfer::cli {

using json = nlohmann::json;

inline constexpr int kReportSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

struct Trajectory {
  std::string name;
  std::vector<std::string> columns;  // first column is "t"
  Matrix data;
};

struct ExperimentReport {
  std::string scenario;
  json config = json::object();
  json results = json::object();
  json hashes = json::object();
  std::vector<Trajectory> trajectories;
  // Extra text artifacts: file name, contents.
  std::vector<std::pair<std::string, std::string>> files;
  double seconds = 0.0;
};

struct RunConfig {
  std::string scenario;
  json params = json::object();
  std::optional<std::uint64_t> seed;
  std::optional<int> replicates;
  int threads = 1;
  std::string data_dir;  // empty: COINFER_DATA_DIR env, then the bundled directory
  bool keep_trajectories = true;
};

using ScenarioFn = std::function<ExperimentReport(const RunConfig&, const json& params)>;

struct ScenarioInfo {
  std::string name;
  std::string description;
  json defaults;
  ScenarioFn run;
};

// Registered scenarios, plus grid-<case>-<method> for any case file found.
std::vector<ScenarioInfo> scenarios(const std::string& data_dir = "");
const ScenarioInfo& find_scenario(const std::vector<ScenarioInfo>& all, const std::string& name);

std::string resolve_data_dir(const std::string& override_dir);
std::string sha256_file(const std::string& path);

// Defaults patched with params; unknown keys are ConfigInvalid.
json effective_params(const ScenarioInfo& info, const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);
// Checks scenario name and params without running.
json validate_config(const RunConfig& cfg);

ExperimentReport run_scenario(const RunConfig& cfg);
std::vector<std::string> emit_reports(const ExperimentReport& report, const std::string& dir);

void write_csv(const std::string& path, const Trajectory& t);
Trajectory read_csv(const std::string& path);

// Scenario groups, defined per testbed.
void register_chain_scenarios(std::vector<ScenarioInfo>& out);
void register_grid_scenarios(std::vector<ScenarioInfo>& out, const std::string& data_dir);

// Helpers shared by scenario files.
std::vector<std::uint64_t> replicate_seeds(const json& params);
json metric_json(const MetricReport& m);
Trajectory make_trajectory(const std::string& name, const std::vector<double>& t,
                           const std::vector<std::pair<std::string, Vector>>& cols);

}  // namespace coinfer::cli
