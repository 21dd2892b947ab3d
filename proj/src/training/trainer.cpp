#include "mtaw/training/trainer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mtaw/data/batching.hpp"
#include "mtaw/errors.hpp"
#include "mtaw/eval/evaluate.hpp"
#include "mtaw/model/mtaw.hpp"
#include "mtaw/numerics/graph.hpp"

namespace mtaw::train {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_dataset(const data::Dataset& ds, const model::ModelConfig& config, const char* what) {
  ds.validate();
  if (ds.num_items != config.num_items) {
    throw DataError(fmt::format("{} split has {} items but the model is configured for {}", what,
                                ds.num_items, config.num_items));
  }
}

bool all_finite(const model::ModelParams& params) {
  for (const auto& [name, t] : params.named()) {
    if (!t->all_finite()) return false;
  }
  return true;
}

}  // namespace

void TrainConfig::validate() const {
  adam().validate();
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
}

EpochStats train_epoch(const data::Dataset& dataset, model::ModelParams& params,
                       OptimizerState& state, const model::ModelConfig& model_config,
                       const TrainConfig& train_config, const LossConfig& loss_config,
                       num::Rng& rng) {
  check_dataset(dataset, model_config, "training");
  const auto start = Clock::now();
  const AdamConfig adam = train_config.adam();
  const data::BatchSequence batches =
      data::make_batches(dataset, train_config.batch_size, true, rng, model_config.max_len);

  double weighted_loss = 0.0;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const data::Batch batch = batches[i];
    params.zero_grad();
    num::Graph g;
    const model::BoundParams bound = model::bind(g, params);
    model::GraphOutputs out;
    try {
      out = model::forward(g, bound, batch, model_config, true, &rng);
    } catch (const NormalizationError&) {
      // A NaN row norm means the parameters already diverged.
      if (!all_finite(params)) throw NumericDivergence(i, std::nan(""));
      throw;
    }
    const num::Var loss = aw_loss(g, out.scores, batch.labels, loss_config);
    const double value = g.value(loss).item();
    if (!std::isfinite(value)) throw NumericDivergence(i, value);
    g.backward(loss);
    adam_step(params, state, adam);
    weighted_loss += value * static_cast<double>(batch.size());
  }

  EpochStats stats;
  stats.batches = batches.size();
  stats.mean_loss = weighted_loss / static_cast<double>(dataset.size());
  stats.seconds = seconds_since(start);
  stats.samples_per_second =
      stats.seconds > 0.0 ? static_cast<double>(dataset.size()) / stats.seconds : 0.0;
  return stats;
}

std::string metric_log_header(std::span<const std::size_t> cutoffs) {
  return "epoch,loss," + eval::metric_header(cutoffs) + ",seconds";
}

std::string metric_log_row(const EpochRecord& record, std::span<const std::size_t> cutoffs) {
  return fmt::format("{},{:.17g},{},{:.3f}", record.epoch, record.loss,
                     eval::metric_fields(record.metrics, cutoffs), record.seconds);
}

FitResult fit(const data::Dataset& train, const data::Dataset& test,
              const model::ModelConfig& model_config, const TrainConfig& train_config,
              const LossConfig& loss_config, FitOptions options) {
  model_config.validate();
  train_config.validate();
  loss_config.validate();
  if (std::find(options.cutoffs.begin(), options.cutoffs.end(), options.selection_cutoff) ==
      options.cutoffs.end()) {
    throw ConfigError(fmt::format("selection cutoff {} is not among the evaluated cutoffs",
                                  options.selection_cutoff));
  }
  check_dataset(train, model_config, "training");
  check_dataset(test, model_config, "test");

  num::Rng rng(train_config.seed);
  FitResult result;
  if (options.initial) {
    options.initial->check_shapes(model_config);
    result.final_params = std::move(*options.initial);
  } else {
    result.final_params = model::ModelParams::initialize(model_config, rng);
  }
  result.optimizer = OptimizerState::for_params(result.final_params);
  result.best_params = result.final_params;

  double best_score = -1.0;
  for (std::size_t epoch = 1; epoch <= train_config.epochs; ++epoch) {
    const auto start = Clock::now();
    const EpochStats stats = train_epoch(train, result.final_params, result.optimizer,
                                         model_config, train_config, loss_config, rng);
    EpochRecord record;
    record.epoch = epoch;
    record.loss = stats.mean_loss;
    record.metrics = eval::evaluate(result.final_params, model_config, test, options.cutoffs,
                                    options.eval_batch_size);
    record.seconds = seconds_since(start);
    const double score = record.metrics.mrr(options.selection_cutoff);
    if (score > best_score) {
      best_score = score;
      result.best_epoch = epoch;
      result.best_params = result.final_params;
    }
    result.log.push_back(record);
    if (options.on_epoch) options.on_epoch(record);
  }
  for (auto* params : {&result.best_params, &result.final_params}) {
    for (auto& [name, t] : params->named()) t->clear_grad();
  }
  return result;
}

}  // namespace mtaw::train
