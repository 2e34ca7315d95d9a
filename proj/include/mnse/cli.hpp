#pragma once

#include <string>
#include <vector>

namespace mnse::cli {

/// Entry point for the command-line tool. Returns the process exit code:
/// 0 success, 1 validation/usage error, 2 runtime or numerical error.
int run(const std::vector<std::string>& args);

} // namespace mnse::cli
