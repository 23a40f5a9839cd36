#pragma once

#include <exception>
#include <iosfwd>

namespace wregress::cli {

// Stable exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitDimension = 3;
inline constexpr int kExitInfeasible = 4;
inline constexpr int kExitSizeCap = 5;
inline constexpr int kExitDegenerate = 6;

int exit_code_for(const std::exception& e);

/// Entry point of the `wregress` binary; everything the command prints goes
/// to `out` / `err`, files named by flags are written directly.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wregress::cli
