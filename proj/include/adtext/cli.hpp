#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace adtext {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitDiverged = 3;

// Runs one `adtext <subcommand> ...` invocation. args excludes the program
// name. Results go to `out`, progress and errors to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace adtext
