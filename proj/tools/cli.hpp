#pragma once

#include <iosfwd>

namespace covsteer {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitInfeasibleTarget = 3;
inline constexpr int kExitNotConverged = 4;
inline constexpr int kExitIo = 5;

/// Full command-line entry point; JSON goes to out unless -o is given, error JSON to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace covsteer
