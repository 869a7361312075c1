#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

namespace scitikz {

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  /// exec failed with ENOENT/EACCES: the program could not be started
  bool not_found = false;
  std::string output;  // interleaved stdout + stderr, capped
  double duration_s = 0.0;
};

struct ProcessOptions {
  std::filesystem::path cwd;
  /// Passed through from the parent environment; everything else is dropped.
  /// A trailing "*" matches a name prefix.
  std::vector<std::string> env_allow;
  /// Extra NAME=VALUE entries appended after the allow-listed ones.
  std::vector<std::string> env_extra;
  double timeout_s = 10.0;
  /// Time between SIGTERM and SIGKILL of the process group on timeout.
  double grace_s = 0.5;
  std::size_t max_output_bytes = 1u << 20;
  /// Written to the child's stdin, which is then closed.
  std::string stdin_data;
};

/// Runs argv[0] (PATH lookup) in its own process group. On timeout the whole
/// group is terminated.
ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& opts);

/// True when `program` names an executable file, directly or via PATH.
bool program_exists(const std::string& program);

}  // namespace scitikz
