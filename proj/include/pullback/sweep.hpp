#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pullback/train.hpp"

namespace pullback {

/// A grid of runs. Methods that do not read eta or k (relaxed, stochastic,
/// baselines) are run once per (lr, seed) instead of once per grid point.
struct SweepGrid {
  TrainConfig base;
  /// Entries are method names, or "linear" / "gold" for the baselines.
  std::vector<std::string> methods;
  std::vector<double> lrs;
  std::vector<double> etas;
  std::vector<int> ks;
  std::vector<std::uint64_t> seeds;

  void validate() const;
};

SweepGrid sweep_grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SweepGrid& grid);

/// Every concrete TrainConfig in the grid, in a fixed order.
std::vector<TrainConfig> expand(const SweepGrid& grid);

/// Does the method's backward pass depend on eta / k?
bool uses_pullback_step(const TrainConfig& config);

/// Human-readable identity of a run, e.g. "ste-i/lr=0.001/eta=1/k=1/seed=0".
std::string run_key(const TrainConfig& config);

/// Identity of the seed group a run belongs to (run_key without the seed).
std::string group_key(const TrainConfig& config);

/// Display label: method name, or the baseline name.
std::string method_label(const TrainConfig& config);

struct Aggregate {
  std::string method;
  TrainConfig config;  // representative (first seed)
  int runs = 0;
  int failed = 0;
  double valid_accuracy_median = 0.0;
  double test_accuracy_median = 0.0;
  double test_accuracy_stderr = 0.0;
  double test_accuracy_std = 0.0;
  double test_recovery_median = 0.0;
  double test_recovery_stderr = 0.0;
  double test_recovery_std = 0.0;
  double decoder_calls_per_example = 0.0;
};

double median(std::vector<double> values);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sample_std(const std::vector<double>& values);
double standard_error(const std::vector<double>& values);

/// Groups records by configuration (over seeds). Failed runs are counted but
/// excluded from the statistics; a group with only failures keeps zeros.
std::vector<Aggregate> aggregate(const std::vector<RunRecord>& records);

/// Per method, the configuration with the largest median validation accuracy.
std::vector<Aggregate> best_per_method(const std::vector<Aggregate>& groups);

struct SweepResult {
  std::vector<RunRecord> records;  // sorted by run_key
  std::vector<Aggregate> groups;
  std::vector<Aggregate> best;
};

using RunFunction = std::function<RunRecord(const TrainConfig&)>;

/// Runs every configuration (optionally on `jobs` threads); individual
/// failures are recorded, not thrown.
SweepResult sweep(const SweepGrid& grid, const RunFunction& run, int jobs = 1);
SweepResult sweep(const SweepGrid& grid, const data::MixtureDataset& dataset, int jobs = 1);

// -- reports -------------------------------------------------------------------
//
// Table CSV columns (fixed order):
//   method,lr,eta,k,runs,failed,valid_acc_median,test_acc_median,test_acc_stderr,
//   test_acc_std,recovery_median,recovery_stderr,recovery_std,decoder_calls_per_example
// Accuracy and recovery columns are percentages. Curves are JSON Lines, one
// full RunRecord per line.

extern const std::vector<std::string> kTableColumns;

void write_table_csv(const std::vector<Aggregate>& rows, std::ostream& out);
void write_curves_jsonl(const std::vector<RunRecord>& records, std::ostream& out);
std::vector<RunRecord> read_curves_jsonl(std::istream& in);

/// Loads every *.json run record under dir.
std::vector<RunRecord> load_run_records(const std::filesystem::path& dir);

}  // namespace pullback
