#pragma once

#include <string>
#include <vector>

namespace lflow {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;  // worst error (or ratio) observed
  double threshold = 0.0;
  std::string detail;
};

/// Fast invariant checks against the oracles: Tweedie moments, covariance
/// modes, Jacobian bounds, closed-form guidance solves, block downsampling,
/// guidance exactness and integrator order. Runs in well under a second.
std::vector<CheckResult> run_oracle_suite();

/// Block-downsampling equivalence over the given sizes and factors.
std::vector<CheckResult> run_block_downsampling(const std::vector<std::size_t>& sizes, const std::vector<std::size_t>& factors);

}  // namespace lflow
