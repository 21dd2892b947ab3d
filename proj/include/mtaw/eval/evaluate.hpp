#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mtaw/data/batching.hpp"
#include "mtaw/data/dataset.hpp"
#include "mtaw/eval/metrics.hpp"
#include "mtaw/model/config.hpp"
#include "mtaw/model/params.hpp"
#include "mtaw/numerics/tensor.hpp"

namespace mtaw::eval {

/// Produces a [B x N] score matrix for a batch.
using BatchScorer = std::function<num::Tensor(const data::Batch&)>;

/// Eval-mode model scorer. Holds references; params and config must outlive it.
BatchScorer model_scorer(const model::ModelParams& params, const model::ModelConfig& config);

/// Rank of each sample's label, in dataset order.
std::vector<std::size_t> target_ranks(const BatchScorer& scorer, const data::Dataset& dataset,
                                      std::size_t batch_size = 256, std::size_t max_len = 0);

MetricReport evaluate(const BatchScorer& scorer, const data::Dataset& dataset,
                      std::span<const std::size_t> cutoffs = kDefaultCutoffs,
                      std::size_t batch_size = 256, std::size_t max_len = 0);

MetricReport evaluate(const model::ModelParams& params, const model::ModelConfig& config,
                      const data::Dataset& dataset,
                      std::span<const std::size_t> cutoffs = kDefaultCutoffs,
                      std::size_t batch_size = 256);

/// Scores every item by how often it is a label in the training split; the
/// same ranking for every session.
class PopularityBaseline {
 public:
  /// Throws DataError on an empty dataset.
  explicit PopularityBaseline(const data::Dataset& train);

  std::span<const double> scores() const noexcept { return scores_; }
  BatchScorer scorer() const;

 private:
  std::vector<double> scores_;
};

}  // namespace mtaw::eval
