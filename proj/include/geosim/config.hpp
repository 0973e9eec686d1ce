#pragma once

#include <string>
#include <vector>

#include "geosim/scenario.hpp"

namespace geosim {

/// Parses and fully validates a scenario config file (JSON). Every violation
/// is collected before throwing ConfigError, so one run reports them all.
ScenarioConfig load_scenario_config(const std::string& path);

/// Same, from an in-memory JSON string (used by tests).
ScenarioConfig parse_scenario_config(const std::string& text);

/// Cross-field validation on an already-built config; returns all violations.
std::vector<std::string> validate_scenario_config(const ScenarioConfig& config);

}  // namespace geosim
