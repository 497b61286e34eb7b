#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace atvs::diagnostics {

struct CheckResult {
  std::string property;
  bool passed = false;
  std::string detail;  // why it failed
};

/// Runs the quick structural invariants of every module (identity warps, soft-argmax
/// point masses, singleton aggregation, loss arithmetic, metric zeros, serialization
/// round trips, determinism). `scratch` receives temporary files.
std::vector<CheckResult> run_selftest(const std::filesystem::path& scratch);

}  // namespace atvs::diagnostics
