#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace concordia {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 2;
inline constexpr int kExitDegenerate = 3;

// args excludes the program name. The report goes to `out`, diagnostics to
// `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace concordia
