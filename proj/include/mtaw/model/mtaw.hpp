#pragma once

#include <span>
#include <vector>

#include "mtaw/data/batching.hpp"
#include "mtaw/data/dataset.hpp"
#include "mtaw/model/config.hpp"
#include "mtaw/model/params.hpp"
#include "mtaw/numerics/graph.hpp"
#include "mtaw/numerics/ops.hpp"

namespace mtaw::model {

/// Graph handles for every parameter tensor.
struct BoundParams {
  num::Var item_embed, pos_embed;
  num::Var itl_query_weight, itl_query_bias;
  num::Var ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  num::Var ln_gain, ln_bias;
};

/// Binds parameters as trainable leaves; gradients land in the tensors.
BoundParams bind(num::Graph& g, ModelParams& params);
/// Binds parameters read-only.
BoundParams bind(num::Graph& g, const ModelParams& params);

/// Intermediate states of a batched forward pass.
struct GraphOutputs {
  num::Var embedded;   // [B x m x d]
  num::Var interests;  // [B x m x d]
  num::Var session;    // [B x d]
  num::Var scores;     // [B x N]
};

/// Keep-mask [B x m x m]: position t sees keys 0..t that are not padding.
num::Mask causal_mask(const data::Batch& batch);
/// Keep-mask [B x 1 x m] over the non-padding keys of each session.
num::Mask key_mask(const data::Batch& batch);

/// Row t of session b is item_embed[item] + pos_embed[t]; padding rows are zero.
num::Var embed(num::Graph& g, const BoundParams& p, const data::Batch& batch,
               const ModelConfig& config);

/// Scaled dot-product attention over [B x r x d] queries and [B x t x d]
/// keys/values: softmax(q . k_j / sqrt(d)) weighted sum of v_j.
num::Var attention(num::Graph& g, num::Var queries, num::Var keys, num::Var values,
                   const num::Mask* mask);

/// Instant interests. Each position's query relu(x_t W + b) attends over
/// positions 1..t of the session in one causally masked pass; the result
/// goes through the feed-forward block with dropout, residual and layer norm.
num::Var interest_tracking(num::Graph& g, const BoundParams& p, num::Var embedded,
                           const data::Batch& batch, const ModelConfig& config, bool training,
                           num::Rng* rng);

/// Session representation [B x d]: the last instant interest attends over
/// all instant interests of its session. Parameter-free.
num::Var interest_enhancing(num::Graph& g, num::Var interests, const data::Batch& batch);

/// Catalog distribution [B x N]: softmax of cosine similarity between the
/// session representation and every item embedding, divided by the
/// configured temperature.
num::Var score(num::Graph& g, const BoundParams& p, num::Var session, const ModelConfig& config);

/// Full forward pass. `rng` drives dropout and is required when training.
GraphOutputs forward(num::Graph& g, const BoundParams& p, const data::Batch& batch,
                     const ModelConfig& config, bool training, num::Rng* rng);

/// Per-session view of the forward intermediates, padding stripped.
struct ForwardTrace {
  num::Tensor embedded;   // [m x d]
  num::Tensor interests;  // [m x d]
  num::Tensor session;    // [d]
  num::Tensor scores;     // [N]
};

/// Eval-mode forward over a batch.
std::vector<ForwardTrace> forward(const data::Batch& batch, const ModelParams& params,
                                  const ModelConfig& config);
std::vector<ForwardTrace> forward(const data::Batch& batch, const ModelParams& params,
                                  const ModelConfig& config, bool training, num::Rng& rng);

// Single-session conveniences, all eval mode.

/// Embeds the last max_len items of a session. Throws DataError on an empty
/// session or an ID outside the catalog.
num::Tensor embed_session(std::span<const data::ItemId> items, const ModelParams& params,
                          const ModelConfig& config);
/// `queries` is [d] or [r x d]; keys/values are [t x d]. The output keeps
/// the rank of `queries`. `mask`, when given, is [r x t].
num::Tensor attention(const num::Tensor& queries, const num::Tensor& keys,
                      const num::Tensor& values, const num::Mask* mask = nullptr);
num::Tensor interest_tracking(const num::Tensor& embedded, const ModelParams& params,
                              const ModelConfig& config);
num::Tensor interest_enhancing(const num::Tensor& interests);
num::Tensor score(const num::Tensor& session, const ModelParams& params,
                  const ModelConfig& config);

}  // namespace mtaw::model
