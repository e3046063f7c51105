#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace oasfim::cli {

enum ExitCode : int { ok = 0, verdict = 1, usage = 2, backend_failure = 3 };

/// Runs one command line (without the program name) and returns the exit
/// code. Normal output goes to `out`, diagnostics and usage text to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oasfim::cli
