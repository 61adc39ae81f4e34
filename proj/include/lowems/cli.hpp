#pragma once

#include "lowems/harness.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace lowems::cli {

/// Entry point for the `lowems` tool. Returns 0 on success, 1 on usage
/// errors, 2 on runtime failures.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

/// Flat JSON object -> SweepConfig. Unknown keys are rejected.
SweepConfig sweep_config_from_json(const nlohmann::json& j);
nlohmann::json sweep_config_to_json(const SweepConfig& cfg);

/// Usage problems detected after argument parsing (bad config keys, ...).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lowems::cli
