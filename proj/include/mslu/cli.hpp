#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mslu::cli {

// Exit codes: 0 success, 1 runtime failure, 2 bad usage.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Runs one subcommand: train | eval | synth-data | gradcheck | serve | demo.
// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mslu::cli
