#pragma once

#include <cstdint>
#include <string>
#include <vector>

// Property suite: every inference routine, gradient and estimator identity is
// compared against an independent oracle on randomly drawn inputs.

namespace pullback::checks {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckOptions {
  /// Random score vectors per tree length.
  int samples = 200;
  std::vector<int> lengths = {2, 3, 4, 5, 6};
  std::uint64_t seed = 20190601;
  /// Epochs for the training-based checks (null gradient, determinism).
  int train_epochs = 200;
};

/// map_tree, marginals, SparseMAP and sparsemax against brute-force oracles.
std::vector<CheckResult> inference_checks(const CheckOptions& options);

/// gamma and every relaxed end-to-end parameter gradient against central
/// finite differences.
std::vector<CheckResult> gradient_checks(const CheckOptions& options);

/// Closed forms of the pulled-back estimators and polytope membership of
/// every CE/EG iterate.
std::vector<CheckResult> estimator_checks(const CheckOptions& options);

/// Exact-Argmax training leaves the encoder bitwise unchanged.
std::vector<CheckResult> null_gradient_checks(const CheckOptions& options);

/// V-measure under random relabelings of the predictions.
std::vector<CheckResult> v_measure_checks(const CheckOptions& options);

/// Two identical seeded runs give identical records.
std::vector<CheckResult> determinism_checks(const CheckOptions& options);

std::vector<CheckResult> run_all(const CheckOptions& options);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace pullback::checks
