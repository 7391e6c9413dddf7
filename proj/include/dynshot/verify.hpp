#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dynshot {

struct CheckResult {
  std::string group;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct VerifyOptions {
  // Groups to run; empty means all of verification_groups().
  std::vector<std::string> only;
  std::uint64_t seed = 17;
};

// grad, collapse, census, cache, sharing, optimizer
const std::vector<std::string>& verification_groups();

// Self-contained invariant suite over freshly assembled models. Never throws for
// a failing check; an exception inside a check is reported as a failure.
std::vector<CheckResult> run_verification(const VerifyOptions& options);

}  // namespace dynshot
