#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ddfe::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,  // usage, I/O or parse error
  kViolated = 2,
  kNotConverged = 3,
};

/// Runs one subcommand. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ddfe::cli
