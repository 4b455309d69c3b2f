#ifndef DRAMATIC_CLI_H_
#define DRAMATIC_CLI_H_

#include <cstdint>
#include <string>
#include <vector>

namespace dramatic {

inline constexpr const char* kVersion = "1.0.0";

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInput = 3;
inline constexpr int kExitEstimation = 4;

// Runs the command line `args` (without the program name). Subcommands:
// fit, roc, simulate, report, rerun. Returns the process exit code.
int RunCli(const std::vector<std::string>& args);

}  // namespace dramatic

#endif  // DRAMATIC_CLI_H_
