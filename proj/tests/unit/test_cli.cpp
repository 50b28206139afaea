#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "jumplab/errors.hpp"
#include "scenario.hpp"

using namespace jumplab;
using cli::Json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Json quick_scenario() {
  return Json::parse(R"({
    "seed": 7,
    "lattice": {"n": 32},
    "experiments": [
      {"type": "chain-build"},
      {"type": "exit-mc", "radii": [0.2], "times": [0.01, 0.05], "paths": 800},
      {"type": "levy-check", "paths": 400},
      {"type": "resolvent-check"}
    ]
  })");
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("every experiment type has defaults and appears in the reference") {
    const std::string ref = cli::config_reference();
    for (const std::string& type : cli::experiment_types()) {
      CAPTURE(type);
      CHECK(cli::experiment_defaults(type).is_object());
      CHECK(ref.find(type) != std::string::npos);
    }
    CHECK(cli::experiment_types().size() == 13);
    CHECK_THROWS_AS(cli::experiment_defaults("no-such-type"), ConfigError);
  }

  TEST_CASE("unknown keys are rejected before any computation") {
    CHECK_THROWS_AS(cli::load_scenario(Json::parse(R"({"lattice": {"spacing": 3}})"), std::string("chain-build")),
                    ConfigError);
    CHECK_THROWS_AS(
        cli::load_scenario(Json::parse(R"({"experiments": [{"type": "exit-mc", "pathz": 10}]})"), std::nullopt),
        ConfigError);
    CHECK_THROWS_AS(cli::load_scenario(Json::parse(R"({"experiments": [{"type": "warp"}]})"), std::nullopt),
                    ConfigError);
  }

  TEST_CASE("violations are collected together") {
    try {
      cli::load_scenario(Json::parse(R"({"kernel": {"alpha": 3.0}, "lattice": {"n": 1}})"), std::string("chain-build"));
      FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("alpha") != std::string::npos);
      CHECK(msg.find("n") != std::string::npos);
    }
  }

  TEST_CASE("a ball that leaves the box is a configuration error") {
    CHECK_THROWS_AS(
        cli::load_scenario(Json::parse(R"({"experiments": [{"type": "exit-mc", "radii": [0.9]}]})"), std::nullopt),
        ConfigError);
  }

  TEST_CASE("a false tail constant fails the run") {
    const cli::Scenario s = cli::load_scenario(
        Json::parse(R"({"kernel": {"bounds": {"kappa3": 0.5}}})"), std::string("kernel-verify"));
    const cli::ScenarioResult r = cli::run_scenario(s, 1);
    CHECK_FALSE(r.all_passed());
    CHECK(cli::exit_code(r) == 1);
    bool tail_failed = false;
    for (const cli::Check& c : r.experiments.at(0).checks)
      if (c.name.find("tail_mass") != std::string::npos) tail_failed = !c.passed;
    CHECK(tail_failed);
  }

  TEST_CASE("seed override and defaults") {
    const cli::Scenario s = cli::load_scenario(Json::object(), std::string("exit-mc"), 99);
    CHECK(s.seed == 99);
    REQUIRE(s.experiments.size() == 1);
    CHECK(s.experiments[0]["type"] == "exit-mc");
    CHECK(s.experiments[0]["paths"] == 10000);
  }

  TEST_CASE("outputs are byte-identical across thread counts") {
    const cli::Scenario s = cli::load_scenario(quick_scenario(), std::nullopt);
    const auto base = std::filesystem::temp_directory_path() / "jumplab_cli_threads";
    std::filesystem::remove_all(base);
    const cli::ScenarioResult one = cli::run_scenario(s, 1);
    const cli::ScenarioResult four = cli::run_scenario(s, 4);
    CHECK(one.all_passed());
    cli::write_outputs(one, s, base / "one", 1, 0.5);
    cli::write_outputs(four, s, base / "four", 4, 0.25);
    std::size_t compared = 0;
    for (const auto& entry : std::filesystem::directory_iterator(base / "one")) {
      const auto name = entry.path().filename();
      if (name == "metadata.json") continue;
      CAPTURE(name.string());
      REQUIRE(std::filesystem::exists(base / "four" / name));
      CHECK(slurp(entry.path()) == slurp(base / "four" / name));
      ++compared;
    }
    CHECK(compared >= 5);
    CHECK(std::filesystem::exists(base / "one" / "summary.json"));
    const Json meta = Json::parse(slurp(base / "four" / "metadata.json"));
    CHECK(meta["threads"] == 4);
    std::filesystem::remove_all(base);
  }
}
