#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace doe::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Runs the command line `args` (args[0] is the program name) and returns
/// the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Runs the oracle cross-checks and prints one row per check. Returns true
/// when every check passes.
bool run_oracle_battery(std::ostream& out);

}  // namespace doe::cli
