#include "mtaw/model/mtaw.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mtaw/errors.hpp"

namespace mtaw::model {
namespace {

using num::Graph;
using num::Tensor;
using num::Var;

template <typename Params>
BoundParams bind_all(Graph& g, Params& p) {
  return BoundParams{g.parameter(p.item_embed),     g.parameter(p.pos_embed),
                     g.parameter(p.itl_query_weight), g.parameter(p.itl_query_bias),
                     g.parameter(p.ffn_w1),         g.parameter(p.ffn_b1),
                     g.parameter(p.ffn_w2),         g.parameter(p.ffn_b2),
                     g.parameter(p.ln_gain),        g.parameter(p.ln_bias)};
}

// x [rows x in] -> [rows x out]
Var linear(Graph& g, Var x, Var weight, Var bias) {
  return num::add_bias(g, num::matmul(g, x, weight), bias);
}

void check_batch(const data::Batch& batch, const ModelConfig& config) {
  if (batch.size() == 0) throw DataError("empty batch");
  if (batch.width > config.max_len) {
    throw DataError("batch width " + std::to_string(batch.width) + " exceeds max_len " +
                    std::to_string(config.max_len));
  }
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (batch.lengths[b] == 0) throw DataError("empty session in batch");
    for (std::size_t t = 0; t < batch.lengths[b]; ++t) {
      if (batch.item(b, t) >= config.num_items) {
        throw DataError("item " + std::to_string(batch.item(b, t)) + " outside catalog of " +
                        std::to_string(config.num_items));
      }
    }
  }
}

data::Batch single_session_batch(std::size_t length) {
  data::Batch batch;
  batch.width = length;
  batch.lengths = {length};
  batch.mask.assign(length, 1);
  batch.items.assign(length, 0);
  batch.labels = {0};
  batch.sample_indices = {0};
  return batch;
}

Tensor slice_rows(const Tensor& t, std::size_t b, std::size_t rows, std::size_t width) {
  const std::size_t d = t.cols();
  std::vector<double> values(t.data() + b * width * d, t.data() + (b * width + rows) * d);
  return Tensor({rows, d}, std::move(values));
}

}  // namespace

BoundParams bind(Graph& g, ModelParams& params) { return bind_all(g, params); }
BoundParams bind(Graph& g, const ModelParams& params) { return bind_all(g, params); }

num::Mask causal_mask(const data::Batch& batch) {
  const std::size_t m = batch.width;
  num::Mask mask({batch.size(), m, m}, false);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t t = 0; t < m; ++t) {
      for (std::size_t j = 0; j <= t && j < batch.lengths[b]; ++j) {
        mask.keep[(b * m + t) * m + j] = 1;
      }
    }
  }
  return mask;
}

num::Mask key_mask(const data::Batch& batch) {
  const std::size_t m = batch.width;
  num::Mask mask({batch.size(), 1, m}, false);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t j = 0; j < batch.lengths[b]; ++j) mask.keep[b * m + j] = 1;
  }
  return mask;
}

Var embed(Graph& g, const BoundParams& p, const data::Batch& batch, const ModelConfig& config) {
  check_batch(batch, config);
  const std::size_t m = batch.width;
  const std::size_t d = config.embed_dim;
  std::vector<std::size_t> positions(batch.size() * m, num::kNoRow);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t t = 0; t < batch.lengths[b]; ++t) positions[b * m + t] = t;
  }
  const num::Shape shape{batch.size(), m, d};
  Var items = num::gather_rows(g, p.item_embed, batch.items, shape);
  Var pos = num::gather_rows(g, p.pos_embed, positions, shape);
  return num::add(g, items, pos);
}

Var attention(Graph& g, Var queries, Var keys, Var values, const num::Mask* mask) {
  const double d = static_cast<double>(g.value(keys).cols());
  Var logits = num::scale(g, num::batched_matmul(g, queries, num::transpose(g, keys)),
                          1.0 / std::sqrt(d));
  Var weights = num::softmax(g, logits, mask);
  return num::batched_matmul(g, weights, values);
}

Var interest_tracking(Graph& g, const BoundParams& p, Var embedded, const data::Batch& batch,
                      const ModelConfig& config, bool training, num::Rng* rng) {
  const std::size_t rows = batch.size() * batch.width;
  const std::size_t d = config.embed_dim;
  const num::Shape batched{batch.size(), batch.width, d};

  Var flat = num::reshape(g, embedded, {rows, d});
  Var queries = num::reshape(
      g, num::relu(g, linear(g, flat, p.itl_query_weight, p.itl_query_bias)), batched);
  const num::Mask mask = causal_mask(batch);
  Var instant = num::reshape(g, attention(g, queries, embedded, embedded, &mask), {rows, d});

  Var hidden = num::relu(g, linear(g, instant, p.ffn_w1, p.ffn_b1));
  Var ffn = linear(g, hidden, p.ffn_w2, p.ffn_b2);
  if (training && config.dropout_rate > 0.0) {
    if (!rng) throw std::invalid_argument("interest_tracking: training mode needs an rng");
    ffn = num::dropout(g, ffn, config.dropout_rate, *rng, true);
  }
  Var normed = num::layer_norm(g, num::add(g, instant, ffn), p.ln_gain, p.ln_bias,
                               config.layer_norm_eps);
  return num::reshape(g, normed, batched);
}

Var interest_enhancing(Graph& g, Var interests, const data::Batch& batch) {
  const Tensor& lv = g.value(interests);
  const std::size_t d = lv.cols();
  const std::size_t m = batch.width;
  std::vector<std::size_t> last(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) last[b] = b * m + batch.lengths[b] - 1;
  Var flat = num::reshape(g, interests, {batch.size() * m, d});
  Var query = num::gather_rows(g, flat, last, {batch.size(), 1, d});
  const num::Mask mask = key_mask(batch);
  return num::reshape(g, attention(g, query, interests, interests, &mask), {batch.size(), d});
}

Var score(Graph& g, const BoundParams& p, Var session, const ModelConfig& config) {
  Var unit_session = num::l2_normalize(g, session);
  Var unit_items = num::l2_normalize(g, p.item_embed);
  Var logits = num::matmul(g, unit_session, num::transpose(g, unit_items));
  if (config.score_temperature != 1.0) logits = num::scale(g, logits, 1.0 / config.score_temperature);
  return num::softmax(g, logits);
}

GraphOutputs forward(Graph& g, const BoundParams& p, const data::Batch& batch,
                     const ModelConfig& config, bool training, num::Rng* rng) {
  GraphOutputs out;
  out.embedded = embed(g, p, batch, config);
  out.interests = interest_tracking(g, p, out.embedded, batch, config, training, rng);
  out.session = interest_enhancing(g, out.interests, batch);
  out.scores = score(g, p, out.session, config);
  return out;
}

namespace {

std::vector<ForwardTrace> run_forward(const data::Batch& batch, const ModelParams& params,
                                      const ModelConfig& config, bool training, num::Rng* rng) {
  Graph g;
  const BoundParams p = bind(g, params);
  const GraphOutputs out = forward(g, p, batch, config, training, rng);
  const Tensor& embedded = g.value(out.embedded);
  const Tensor& interests = g.value(out.interests);
  const Tensor& session = g.value(out.session);
  const Tensor& scores = g.value(out.scores);
  std::vector<ForwardTrace> traces(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    ForwardTrace& tr = traces[b];
    tr.embedded = slice_rows(embedded, b, batch.lengths[b], batch.width);
    tr.interests = slice_rows(interests, b, batch.lengths[b], batch.width);
    tr.session = Tensor({session.cols()}, std::vector<double>(session.row(b).begin(),
                                                              session.row(b).end()));
    tr.scores = Tensor({scores.cols()},
                       std::vector<double>(scores.row(b).begin(), scores.row(b).end()));
  }
  return traces;
}

}  // namespace

std::vector<ForwardTrace> forward(const data::Batch& batch, const ModelParams& params,
                                  const ModelConfig& config) {
  return run_forward(batch, params, config, false, nullptr);
}

std::vector<ForwardTrace> forward(const data::Batch& batch, const ModelParams& params,
                                  const ModelConfig& config, bool training, num::Rng& rng) {
  return run_forward(batch, params, config, training, &rng);
}

Tensor embed_session(std::span<const data::ItemId> items, const ModelParams& params,
                     const ModelConfig& config) {
  if (items.empty()) throw DataError("cannot embed an empty session");
  const std::vector<data::Session> one = {data::Session{{items.begin(), items.end()}, 0}};
  const data::Batch batch = data::collate(one, config.max_len);
  Graph g;
  const BoundParams p = bind(g, params);
  return slice_rows(g.value(embed(g, p, batch, config)), 0, batch.width, batch.width);
}

Tensor attention(const Tensor& queries, const Tensor& keys, const Tensor& values,
                 const num::Mask* mask) {
  if (keys.rank() != 2 || values.rank() != 2 || keys.dim(0) != values.dim(0) ||
      keys.dim(1) != queries.cols()) {
    throw DimensionError("attention: incompatible query/key/value shapes " +
                         num::to_string(queries.shape()) + ", " + num::to_string(keys.shape()) +
                         ", " + num::to_string(values.shape()));
  }
  const std::size_t r = queries.rows();
  const std::size_t t = keys.dim(0);
  num::Mask batched;
  if (mask) {
    if (num::element_count(mask->shape) != r * t) {
      throw DimensionError("attention: mask " + num::to_string(mask->shape) + " is not " +
                           std::to_string(r) + "x" + std::to_string(t));
    }
    batched.shape = {1, r, t};
    batched.keep = mask->keep;
  }
  Graph g;
  Var q = g.constant(queries.reshaped({1, r, queries.cols()}));
  Var k = g.constant(keys.reshaped({1, t, keys.cols()}));
  Var v = g.constant(values.reshaped({1, t, values.cols()}));
  const Tensor& out = g.value(attention(g, q, k, v, mask ? &batched : nullptr));
  return queries.rank() == 1 ? out.reshaped({values.cols()}) : out.reshaped({r, values.cols()});
}

Tensor interest_tracking(const Tensor& embedded, const ModelParams& params,
                         const ModelConfig& config) {
  const std::size_t m = embedded.rows();
  if (m == 0) throw DataError("interest_tracking: empty session");
  const data::Batch batch = single_session_batch(m);
  Graph g;
  const BoundParams p = bind(g, params);
  Var x = g.constant(embedded.reshaped({1, m, embedded.cols()}));
  const Tensor& out = g.value(interest_tracking(g, p, x, batch, config, false, nullptr));
  return out.reshaped({m, embedded.cols()});
}

Tensor interest_enhancing(const Tensor& interests) {
  const std::size_t m = interests.rows();
  if (m == 0) throw DataError("interest_enhancing: empty session");
  const data::Batch batch = single_session_batch(m);
  Graph g;
  Var l = g.constant(interests.reshaped({1, m, interests.cols()}));
  return g.value(interest_enhancing(g, l, batch)).reshaped({interests.cols()});
}

Tensor score(const Tensor& session, const ModelParams& params, const ModelConfig& config) {
  Graph g;
  const BoundParams p = bind(g, params);
  Var o = g.constant(session.reshaped({1, session.size()}));
  return g.value(score(g, p, o, config)).reshaped({config.num_items});
}

}  // namespace mtaw::model
