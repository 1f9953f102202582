#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mnagt::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kDataError = 2, kVerifyFailed = 3 };

/// Runs the command line `args` (args[0] is the program name). Metrics and
/// reports go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mnagt::cli
