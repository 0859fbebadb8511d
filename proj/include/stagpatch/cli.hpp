#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace stagpatch {

// Exit codes: 0 success, 1 numerical failure, 2 validation failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitValidation = 2;

// Runs one command line (args excludes the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stagpatch
