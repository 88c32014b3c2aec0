#pragma once

#include <string>
#include <vector>

namespace mvsde {

/// Dispatches a full command line (without argv[0]). Returns the process
/// exit code: 0 pass, 2 acceptance-window failure, 1 error.
int run_cli(const std::vector<std::string>& args);

}  // namespace mvsde
