#pragma once

#include <string>
#include <vector>

namespace reside::cli {

enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_argument = 2,
  exit_format = 3,
  exit_config = 4,
  exit_divergence = 5,
  exit_training = 6,
};

/// Runs one CLI invocation (args excludes the program name) and returns the
/// process exit code. Never throws.
int run(const std::vector<std::string>& args);

}  // namespace reside::cli
