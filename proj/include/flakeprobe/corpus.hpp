#pragma once

// Built-in catalogue of scripted apps and tests.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flakeprobe/oracle.hpp"
#include "flakeprobe/program.hpp"

namespace flakeprobe {

enum class Expectation { FlakyDetectable, FlakyButReductionMiss, FlakyButSleepGuarded, Clean };
enum class Category { C1, C2, C3 };

std::string_view to_string(Expectation e);
std::string_view to_string(Category c);

using Params = std::map<std::string, std::int64_t>;

struct Scenario {
  std::string name;
  AppProgram app;
  TestProgram test;
  Expectation expected = Expectation::Clean;
  std::optional<Category> category;
  Params params;
};

std::vector<std::string> scenario_names();

/// Throws UnknownName.
Params default_params(const std::string& name);

/// Builds a scenario, overriding defaults with `params`. Throws UnknownName for
/// an unknown scenario and ValidationError for an unknown or invalid parameter.
Scenario make_scenario(const std::string& name, const Params& params = {});

std::vector<Scenario> catalogue();

AppProgram register_corpus_app(const std::string& name);
TestProgram register_corpus_test(const std::string& name);

/// Parsed `{app, test, params}` scenario file.
struct ScenarioFile {
  std::string app;
  std::string test;
  Params params;
};

/// Throws ValidationError on malformed content.
ScenarioFile parse_scenario_file(const std::string& text);
ScenarioFile load_scenario_file(const std::string& path);
Scenario make_scenario(const ScenarioFile& file);

struct CatalogueCheck {
  std::string scenario;
  Expectation expected = Expectation::Clean;
  OracleResult oracle;
  bool ok = true;
};

/// Runs the oracle on each scenario and compares with its expectation.
std::vector<CatalogueCheck> check_scenarios(const std::vector<Scenario>& scenarios);

/// Throws CatalogueInvalid naming every mismatching scenario.
std::vector<CatalogueCheck> validate_scenarios(const std::vector<Scenario>& scenarios);
std::vector<CatalogueCheck> validate_catalogue();

}  // namespace flakeprobe
