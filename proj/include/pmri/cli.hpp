#pragma once

#include <string>
#include <vector>

namespace pmri {

/// Runs the command-line front end. Exit codes: 0 on success, 2 on
/// usage or data errors, 3 on numerical failure.
int run_cli(const std::vector<std::string>& args);
int run_cli(int argc, const char* const* argv);

}  // namespace pmri
