#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pullback/data.hpp"
#include "pullback/estimators.hpp"
#include "pullback/optimizer.hpp"

namespace pullback {

/// Which host network is trained.
///  latent  encoder -> latent node (per estimator) -> decoder
///  linear  a single global linear model (no latent variable)
///  gold    the decoder fed the true latent value; the encoder is unused
enum class ModelKind { Latent, Linear, Gold };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct TrainConfig {
  ModelKind model = ModelKind::Latent;
  EstimatorSpec estimator;
  double lr = 1e-3;
  int epochs = 10000;
  /// 0 means full batch.
  int batch_size = 0;
  std::uint64_t seed = 0;
  AdamWConfig optimizer;
  int eval_every = 100;
  /// Std-dev of the initial weights.
  double init_scale = 0.1;
  /// Hidden width of the toy tree scorer.
  int hidden = 8;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct EvalPoint {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double valid_accuracy = 0.0;
  /// V-measure (mixture) or UAS (trees) on the validation split.
  double valid_recovery = 0.0;
  double test_accuracy = 0.0;
  double test_recovery = 0.0;
  /// Cumulative decoder forward+backward passes.
  double decoder_calls = 0.0;
};

struct RunRecord {
  TrainConfig config;
  /// "v_measure" or "uas".
  std::string recovery_metric = "v_measure";
  std::vector<EvalPoint> curve;

  bool failed = false;
  std::string failure;

  // selected at the evaluation with the best validation accuracy
  int best_epoch = 0;
  double valid_accuracy = 0.0;
  double test_accuracy = 0.0;
  double test_recovery = 0.0;

  /// Decoder calls per training example per step (1 for a plain forward/backward).
  double decoder_calls_per_example = 0.0;
  long projection_failures = 0;
  double wall_seconds = 0.0;

  /// Final parameters (flattened model).
  Vector final_params;
  Vector initial_params;

  /// All content except wall time.
  bool same_numbers(const RunRecord& other) const;
};

nlohmann::json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& j);

/// One training run. Deterministic given (config, dataset). Divergence marks
/// the record as failed and keeps whatever was recorded.
RunRecord train(const TrainConfig& config, const data::MixtureDataset& dataset);
RunRecord train(const TrainConfig& config, const data::StructuredDataset& dataset);

}  // namespace pullback
