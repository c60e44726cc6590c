#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace flowagree::cli {

enum ExitCode : int {
  kOk = 0,
  kValidationFailed = 1,  // also: oracle gap too large, regulator infeasible
  kParseError = 2,        // also: scenario unsupported by the subcommand
  kDiverged = 3,
};

struct RunOverrides {
  std::optional<double> dt;
  std::optional<double> horizon;
  std::string out_dir;  // empty: scenario outputs, else $FLOWAGREE_OUT_DIR, else ./flowagree_out
};

int validate_command(const std::string& path, std::ostream& out);
int run_command(const std::string& path, const RunOverrides& overrides, std::ostream& out);
/// Runs every *.json scenario in dir concurrently; returns the largest exit code.
int batch_command(const std::string& dir, const RunOverrides& overrides, std::ostream& out);
int oracle_command(const std::string& path, std::ostream& out);
int regulator_command(const std::string& path, std::ostream& out);

/// Parses subcommand arguments (program name excluded) and dispatches.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flowagree::cli
