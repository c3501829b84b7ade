#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "msreg/core.hpp"

namespace msreg::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kInvalidArgument = 3,
  kDimensionMismatch = 4,
  kIo = 5,
  kFormat = 6,
  kNumeric = 7,
  kRegistration = 8,
  kReplayMismatch = 9,
};

int exit_code(ErrorKind kind);

/// Runs one command line (without the program name) and returns the exit
/// code. Diagnostics go to `err`, progress to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace msreg::cli
