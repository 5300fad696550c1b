#pragma once

// Command-line front end. Subcommands: validate | reduce | solve-ddare |
// synthesize | certify | verify-certificate | delay-margin | simulate.
// stdout carries one JSON payload (or CSV when requested); diagnostics go to
// stderr. Exit codes: 0 success, 2 not stabilizable / certificate rejected,
// 3 invalid input, 4 numerical failure.

#include <iosfwd>

namespace delayctl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNotStabilizable = 2;
inline constexpr int kExitInvalidInput = 3;
inline constexpr int kExitNumericalFailure = 4;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace delayctl
