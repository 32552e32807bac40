#pragma once

// Command-line front end. One binary, one subcommand per task; every
// randomized subcommand records its seed and config hash next to its outputs.

#include <iosfwd>
#include <string>
#include <vector>

namespace svgap {

/// Exit status for every kind of error.
inline constexpr int cli_error_exit = 3;

/// args excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Subcommand names in the order shown by --help.
std::vector<std::string> cli_subcommands();

}  // namespace svgap
