#pragma once

#include <string>
#include <vector>

namespace m3dseg::cli {

enum ExitCode : int { kOk = 0, kValidation = 2, kDivergence = 3, kIo = 4 };

/// Runs the m3dseg command line; returns the process exit code. Diagnostics
/// go to stderr, progress to stdout.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace m3dseg::cli
