#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pullback/data.hpp"
#include "pullback/sweep.hpp"

namespace pullback::experiments {

struct Protocol {
  TrainConfig base;
  std::vector<double> lrs = {1e-4, 1e-3, 2e-3};
  std::vector<double> etas = {0.1, 1.0, 2.0};
  /// Hyperparameters are picked on this seed alone.
  std::uint64_t tuning_seed = 0;
  /// Seeds of the final comparison; the tuning seed is reused if listed.
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3};
  int jobs = 1;
  /// Called once per finished run, possibly from a worker thread.
  std::function<void(const RunRecord&)> on_run;
};

struct Outcome {
  /// Median / spread over the protocol seeds at the selected configuration.
  Aggregate result;
  /// Every run, tuning included.
  std::vector<RunRecord> records;
};

/// Grid search over (lr, eta) on the tuning seed by validation accuracy,
/// then the winning configuration on every seed.
Outcome tune_then_replicate(const std::string& method, const data::MixtureDataset& dataset, const Protocol& protocol);

struct StepPoint {
  int k = 1;
  Aggregate result;
};

/// One fixed (lr, eta) per k, every protocol seed, no tuning.
std::vector<StepPoint> pullback_steps(const std::string& method, const std::vector<int>& ks, double lr, double eta,
                                      const data::MixtureDataset& dataset, const Protocol& protocol,
                                      std::vector<RunRecord>* records = nullptr);

/// Index of the largest value (first on ties).
std::size_t best_index(const std::vector<double>& values);

/// values[i + 1] >= values[i] - slack for every i before the maximum.
bool non_decreasing_to_best(const std::vector<double>& values, double slack);

}  // namespace pullback::experiments
