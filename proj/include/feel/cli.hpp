#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace feel::cli {

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 2,    // bad flags, unreadable or invalid config
  kRuntimeError = 3,  // infeasible instance, solver or fit failure, grid cap
};

/// Runs one command (`plan`, `simulate`, `fit-gpu`, `verify`) with
/// args[0] as the program name. Human-readable output goes to `out`,
/// diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace feel::cli
