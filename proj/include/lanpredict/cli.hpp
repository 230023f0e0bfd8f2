#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lanpredict {

/// Exit codes of the command line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,      // usage or configuration error
  kExitNumerical = 2,  // estimation failure rate >= 1%
  kExitCheckFailed = 3,
};

struct SelfCheck {
  std::string name;
  bool passed;
  std::string detail;
};

/// Closed-form invariants of the model, evaluated without Monte Carlo.
std::vector<SelfCheck> run_selftest();

/// Runs one invocation. `args` excludes the program name. Thread count is read
/// from LANPREDICT_THREADS (0 or unset = auto).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lanpredict
