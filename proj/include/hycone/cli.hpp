#pragma once

#include <string>
#include <vector>

namespace hycone::cli {

// Runs the command-line driver. `args` excludes the program name.
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numerical failure (including a failed gradient audit).
int run(const std::vector<std::string>& args);

}  // namespace hycone::cli
