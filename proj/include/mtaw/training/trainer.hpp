#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mtaw/data/dataset.hpp"
#include "mtaw/eval/metrics.hpp"
#include "mtaw/model/config.hpp"
#include "mtaw/model/params.hpp"
#include "mtaw/numerics/tensor.hpp"
#include "mtaw/training/adam.hpp"
#include "mtaw/training/loss.hpp"

namespace mtaw::train {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t epochs = 50;
  std::size_t batch_size = 100;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 42;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
  bool operator==(const TrainConfig&) const = default;
};

struct EpochStats {
  double mean_loss = 0.0;
  double seconds = 0.0;
  double samples_per_second = 0.0;
  std::size_t batches = 0;
};

/// One shuffled pass: forward, loss, backward and an Adam step per batch.
/// `rng` drives both the shuffle and dropout. Throws NumericDivergence on a
/// non-finite batch loss; parameters then hold the last finite update.
EpochStats train_epoch(const data::Dataset& dataset, model::ModelParams& params,
                       OptimizerState& state, const model::ModelConfig& model_config,
                       const TrainConfig& train_config, const LossConfig& loss_config,
                       num::Rng& rng);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  eval::MetricReport metrics;
  double seconds = 0.0;
};

/// "epoch,loss,P@10,MRR@10,P@20,MRR@20,seconds".
std::string metric_log_header(std::span<const std::size_t> cutoffs = eval::kDefaultCutoffs);
std::string metric_log_row(const EpochRecord& record,
                           std::span<const std::size_t> cutoffs = eval::kDefaultCutoffs);

struct FitOptions {
  std::vector<std::size_t> cutoffs = eval::kDefaultCutoffs;
  /// The retained checkpoint maximizes MRR at this cutoff.
  std::size_t selection_cutoff = 20;
  std::size_t eval_batch_size = 256;
  /// Starting point; freshly initialized from the seed when empty.
  std::optional<model::ModelParams> initial;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct FitResult {
  model::ModelParams best_params;
  /// 0 when no epoch ran and best_params are the initial ones.
  std::size_t best_epoch = 0;
  model::ModelParams final_params;
  OptimizerState optimizer;
  std::vector<EpochRecord> log;
};

/// Trains for train_config.epochs, evaluating on `test` after every epoch.
FitResult fit(const data::Dataset& train, const data::Dataset& test,
              const model::ModelConfig& model_config, const TrainConfig& train_config,
              const LossConfig& loss_config, FitOptions options = {});

}  // namespace mtaw::train
