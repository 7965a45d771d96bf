#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace drift {

/// Exit codes shared by all subcommands.
enum ExitCode : int {
  kExitPass = 0,
  kExitHypothesisFail = 1,
  kExitUsage = 2,
  kExitNumerical = 3,
};

/// Runs the command line `args` (without the program name). Progress and
/// verdict lines go to `out`, diagnostics to `err`; reports land under --out.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace drift
