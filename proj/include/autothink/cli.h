#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace autothink::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,  // invalid config or arguments
  kDiverged = 3,
  kNoInput = 4,  // every transcript line malformed, or none at all
  kOracleFailure = 5,
  kInternal = 1,
};

/// Entry point behind the `autothink` binary. `args` excludes the program
/// name. Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace autothink::cli
