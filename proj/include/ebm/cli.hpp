#pragma once

#include <iosfwd>

namespace ebm::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 1;
inline constexpr int kNumericError = 2;
inline constexpr int kLimitError = 3;

// Entry point of the `ebmtool` executable. Normal output goes to `out`,
// diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ebm::cli
