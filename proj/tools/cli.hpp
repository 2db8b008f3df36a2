#ifndef PPCALIB_TOOLS_CLI_HPP
#define PPCALIB_TOOLS_CLI_HPP

#include <string>
#include <vector>

namespace ppcalib::cli {

/// Runs `ppcalib <args...>` (args excludes the program name) and returns the
/// process exit code.
int run(const std::vector<std::string>& args);

/// Parses a comma-separated list of scalar expressions: numbers, log(e),
/// exp(e), sqrt(e), parentheses and unary minus, e.g. "log(300),-3".
std::vector<double> parse_scalar_list(const std::string& text);

}  // namespace ppcalib::cli

#endif  // PPCALIB_TOOLS_CLI_HPP
