#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hsal::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDataError = 3,
  kNumericError = 4,
};

/// Runs one command line (without the program name) and returns its exit
/// code. Results go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// `key=value` lines ('#' starts a comment) turned into `--key=value` tokens.
std::vector<std::string> read_config_file(const std::string& path);

}  // namespace hsal::cli
