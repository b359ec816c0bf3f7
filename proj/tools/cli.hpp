#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mmot::app {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kInputFormat = 3,
  kConfig = 4,
  kNumerical = 5,
  kFileAccess = 6,
  kDimensionMismatch = 7,
};

// Entry point of the `mmot` tool; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mmot::app
