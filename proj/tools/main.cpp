#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "jumplab/errors.hpp"
#include "scenario.hpp"

namespace {

using jumplab::cli::Json;

void print_result(const jumplab::cli::ScenarioResult& result) {
  for (const auto& e : result.experiments) {
    if (e.status != "ok") std::cout << e.type << ": " << e.status << ": " << e.error << "\n";
    for (const auto& c : e.checks) std::cout << (c.passed ? "PASS " : "FAIL ") << e.type << "/" << c.name << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jumplab: symmetric jump processes on lattices"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::string out_dir = "jumplab-out";
  app.add_option("--config", config_path, "scenario JSON file");
  app.add_option("--seed", seed, "override the scenario seed");
  app.add_option("--threads", threads, "worker threads (results do not depend on it)")->check(CLI::Range(1, 256));
  app.add_option("--out", out_dir, "output directory");

  app.add_subcommand("run", "run every experiment listed in --config");
  app.add_subcommand("config-reference", "print every config key with its default");
  for (const std::string& type : jumplab::cli::experiment_types())
    app.add_subcommand(type, "run the " + type + " experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  if (name == "config-reference") {
    std::cout << jumplab::cli::config_reference();
    return 0;
  }

  const auto start = std::chrono::steady_clock::now();
  jumplab::cli::Scenario scenario;
  try {
    if (name == "run" && config_path.empty()) throw jumplab::ConfigError("run needs --config");
    const Json user = config_path.empty() ? Json::object() : jumplab::cli::read_config_file(config_path);
    scenario = jumplab::cli::load_scenario(user, name == "run" ? std::nullopt : std::optional<std::string>(name), seed);
  } catch (const jumplab::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  }

  jumplab::cli::ScenarioResult result;
  try {
    result = jumplab::cli::run_scenario(scenario, threads);
  } catch (const jumplab::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    jumplab::cli::write_outputs(result, scenario, out_dir, threads, wall);
  } catch (const std::exception& e) {
    std::cerr << "cannot write outputs: " << e.what() << "\n";
    return 1;
  }
  print_result(result);
  std::cout << "outputs in " << out_dir << "\n";
  return jumplab::cli::exit_code(result);
}
