#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ssmix::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kDataError = 2, kNumericFailure = 3 };

/// Runs one command (gen, train, eval, mix, saliency, sweep). Errors are
/// reported as a one-line diagnostic on `err` and mapped to an exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace ssmix::cli
