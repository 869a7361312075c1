#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace scitikz {

/// Exit codes of every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRecordFailures = 1;
inline constexpr int kExitEnvironment = 2;

/// Entry point of the `scitikz` tool. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace scitikz
