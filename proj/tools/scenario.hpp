#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace jumplab::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kVersion = "0.1.0";

/// Every experiment selector accepted in a config, in subcommand order.
const std::vector<std::string>& experiment_types();

/// Top-level defaults (kernel, sequence, lattice, chain, seed).
Json default_config();

/// Parameter defaults of one experiment type; ConfigError for unknown types.
Json experiment_defaults(const std::string& type);

/// Markdown page listing every key and its default.
std::string config_reference();

/// A validated scenario: the merged config and the experiments to run.
struct Scenario {
  Json config;
  std::vector<Json> experiments;  ///< each holds "type" plus its merged parameters
  std::uint64_t seed = 1;
};

/// Merges `user` over the defaults and validates every experiment before any
/// computation. With `only_type`, runs the config's experiments of that type,
/// or one default experiment of that type when the config lists none.
/// Throws ConfigError listing all violations.
Scenario load_scenario(const Json& user, const std::optional<std::string>& only_type,
                       std::optional<std::uint64_t> seed_override = std::nullopt);

Json read_config_file(const std::filesystem::path& path);

struct Artifact {
  std::string name;
  std::string content;
};

struct Check {
  std::string name;
  bool passed = false;
  Json detail;
};

struct ExperimentResult {
  std::string type;
  std::string status = "ok";  ///< "ok" or "error"
  std::string error;
  std::vector<Check> checks;
  std::vector<Artifact> artifacts;
  Json summary = Json::object();
};

struct ScenarioResult {
  std::vector<ExperimentResult> experiments;
  bool all_passed() const;
  /// Deterministic summary: no wall time, thread count or timestamps.
  Json summary(const Scenario& scenario) const;
};

/// Runs the experiments in order. Errors inside an experiment are recorded
/// in its status; ConfigError from a kernel or lattice propagates.
ScenarioResult run_scenario(const Scenario& scenario, int threads);

/// Writes the CSV artifacts, summary.json and metadata.json (wall time,
/// threads, timestamp) into `out`.
void write_outputs(const ScenarioResult& result, const Scenario& scenario, const std::filesystem::path& out,
                   int threads, double wall_seconds);

/// 0 when every check passed, 1 otherwise.
int exit_code(const ScenarioResult& result);

}  // namespace jumplab::cli
