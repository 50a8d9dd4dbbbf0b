#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qml::cli {

enum ExitCode { kPass = 0, kCheckFailed = 1, kConfigError = 2 };

struct RunOptions {
  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

/// Runs one subcommand and writes <command>_report.json (plus CSV
/// artifacts) into out_dir. Returns the process exit code.
int run(const RunOptions& opt, std::ostream& log);

/// Argument parsing front end: qml <command> --config <path> [--out <dir>]
/// [--seed <u64>] [--jobs <k>].
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

const std::vector<std::string>& commands();

}  // namespace qml::cli
