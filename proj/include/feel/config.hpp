#pragma once

#include <iosfwd>
#include <string>

#include "feel/simulator.hpp"

/// Sectioned key = value configuration files. Every key carries its unit in
/// the name; omitted keys keep the defaults of sim::ScenarioConfig. Unknown
/// sections and keys are rejected. The schema is documented in docs/config.md.
namespace feel::config {

struct OutputPaths {
  std::string rounds_csv = "feel_rounds.csv";
  std::string summary_json = "feel_summary.json";
  std::string plan_json = "feel_plan.json";
};

struct Config {
  sim::ScenarioConfig scenario;
  OutputPaths output;
};

/// Throws ConfigError naming the offending line and key.
Config parse(std::istream& in, const std::string& source = "<config>");
Config load(const std::string& path);

}  // namespace feel::config
