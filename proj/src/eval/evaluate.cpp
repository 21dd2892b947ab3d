#include "mtaw/eval/evaluate.hpp"

#include <algorithm>
#include <numeric>

#include "mtaw/errors.hpp"
#include "mtaw/model/mtaw.hpp"
#include "mtaw/numerics/graph.hpp"

namespace mtaw::eval {

BatchScorer model_scorer(const model::ModelParams& params, const model::ModelConfig& config) {
  return [&params, &config](const data::Batch& batch) {
    num::Graph g;
    const model::BoundParams p = model::bind(g, params);
    const model::GraphOutputs out = model::forward(g, p, batch, config, false, nullptr);
    return g.value(out.scores);
  };
}

std::vector<std::size_t> target_ranks(const BatchScorer& scorer, const data::Dataset& dataset,
                                      std::size_t batch_size, std::size_t max_len) {
  if (dataset.empty()) throw DataError("cannot evaluate an empty dataset");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const data::BatchSequence batches(dataset, batch_size, std::move(order), max_len);
  std::vector<std::size_t> ranks;
  ranks.reserve(dataset.size());
  for (const data::Batch& batch : batches) {
    const num::Tensor scores = scorer(batch);
    if (scores.rank() != 2 || scores.dim(0) != batch.size()) {
      throw DimensionError("scorer returned " + num::to_string(scores.shape()) + " for a batch of " +
                           std::to_string(batch.size()));
    }
    for (std::size_t b = 0; b < batch.size(); ++b) {
      ranks.push_back(rank_of_target(scores.row(b), batch.labels[b]));
    }
  }
  return ranks;
}

MetricReport evaluate(const BatchScorer& scorer, const data::Dataset& dataset,
                      std::span<const std::size_t> cutoffs, std::size_t batch_size,
                      std::size_t max_len) {
  const auto ranks = target_ranks(scorer, dataset, batch_size, max_len);
  return summarize(ranks, cutoffs);
}

MetricReport evaluate(const model::ModelParams& params, const model::ModelConfig& config,
                      const data::Dataset& dataset, std::span<const std::size_t> cutoffs,
                      std::size_t batch_size) {
  return evaluate(model_scorer(params, config), dataset, cutoffs, batch_size, config.max_len);
}

PopularityBaseline::PopularityBaseline(const data::Dataset& train) {
  if (train.empty()) throw DataError("popularity baseline needs a nonempty training split");
  scores_.assign(train.num_items, 0.0);
  for (const auto& s : train.sessions) {
    if (s.label >= scores_.size()) throw DataError("label outside catalog");
    scores_[s.label] += 1.0;
  }
}

BatchScorer PopularityBaseline::scorer() const {
  return [scores = scores_](const data::Batch& batch) {
    num::Tensor out({batch.size(), scores.size()});
    for (std::size_t b = 0; b < batch.size(); ++b) {
      std::copy(scores.begin(), scores.end(), out.row(b).begin());
    }
    return out;
  };
}

}  // namespace mtaw::eval
