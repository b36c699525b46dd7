#pragma once

#include <string>
#include <vector>

namespace unest {

struct SelfTestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Quick deterministic invariant suite (scope semantics, adjointness, loss
// closed forms, autodiff spot checks, serialization round trips). The full
// acceptance suite lives in the test tree; this is the CLI-facing subset.
std::vector<SelfTestResult> run_selftest();

// One line per check plus a summary; identical bytes for identical builds.
std::string format_selftest_report(const std::vector<SelfTestResult>& results);

}  // namespace unest
