#pragma once

#include <iosfwd>

namespace qarspec::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kSuccess = 0,
  kInternalError = 1,
  kUsageError = 2,
  kNumericError = 3,
};

/**
 * Entry point shared by the executable and the tests. Subcommands: factors,
 * fit, test, montecarlo, smooth, simulate.
 */
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qarspec::cli
