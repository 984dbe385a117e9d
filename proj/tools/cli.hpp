#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace clinchlab::cli {

/// Exit codes: 0 success, 1 property violation, 2 error.
enum ExitCode : int { Ok = 0, PropertyViolation = 1, Failure = 2 };

/// Runs one command line (without the program name) and writes results to
/// `out`, diagnostics to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clinchlab::cli
