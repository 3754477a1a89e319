#pragma once

#include <string>
#include <vector>

#include "config.hpp"
#include "table.hpp"

namespace dualdiv::cli {

inline constexpr const char* kVersion = "0.3.0";

inline const std::vector<std::string> kCommands = {"value",       "optimize", "barrier",
                                                   "scale-table", "simulate", "verify"};

struct CommandResult {
  Table table;
  /// `verify` only: at least one gate failed.
  bool gates_failed = false;
};

/// Runs one command on a parsed configuration. Grid overrides from the
/// command line are already folded into `cfg`.
CommandResult run_command(const std::string& command, const RunConfig& cfg);

}  // namespace dualdiv::cli
