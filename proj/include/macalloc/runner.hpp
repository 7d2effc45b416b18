#pragma once

#include <string>
#include <vector>

#include "macalloc/config.hpp"

namespace macalloc {

inline constexpr const char* kVersion = "0.1.0";

// Executes one CLI command against a loaded config, writing the command's
// artifacts plus manifest.json into out_dir. Throws ConfigError, ModeError
// or ConvergenceError; the CLI maps those to exit codes 2, 3 and 4.
// Returns the list of files written (relative to out_dir).
std::vector<std::string> run_command(const std::string& command, const ScenarioConfig& cfg,
                                     const std::string& out_dir);

}  // namespace macalloc
