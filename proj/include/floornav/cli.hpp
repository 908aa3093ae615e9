#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace floornav::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kIo = 2,
  kGateway = 3,
  kDegraded = 4,
};

/// Runs one command line; args exclude the program name.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace floornav::cli
