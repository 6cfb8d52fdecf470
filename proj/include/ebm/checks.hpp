#pragma once

// Fast randomized self-checks of the library's core identities, meant to run
// in a few seconds on any machine (the `check` subcommand).

#include <cstdint>
#include <string>
#include <vector>

namespace ebm {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;  // the measured quantity against its tolerance
};

std::vector<CheckResult> run_invariant_checks(std::uint64_t seed);

}  // namespace ebm
