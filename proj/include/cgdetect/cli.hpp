#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cgd {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

struct AblationRow {
  std::string label;    // row label of the published table
  std::string variant;  // ablation_variant() name
};

/// Rows of one ablation family: streams, filters, residual or pooling.
std::vector<AblationRow> ablation_rows(std::string_view family);

/// Runs the tool with argv-style arguments (args[0] is the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cgd
