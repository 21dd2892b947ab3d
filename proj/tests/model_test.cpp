#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mtaw/errors.hpp"
#include "mtaw/model/mtaw.hpp"
#include "test_util.hpp"

namespace mtaw::model {
namespace {

using num::Tensor;
using testing::random_params;
using testing::random_sessions;
using testing::toy_config;

// Plain-loop reference for one attention query over keys 0..count-1.
std::vector<double> loop_attention(std::span<const double> q, const std::vector<std::vector<double>>& kv,
                                   std::size_t count) {
  const std::size_t d = q.size();
  std::vector<double> logits(count);
  for (std::size_t j = 0; j < count; ++j) {
    double dot = 0.0;
    for (std::size_t c = 0; c < d; ++c) dot += q[c] * kv[j][c];
    logits[j] = dot / std::sqrt(static_cast<double>(d));
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double& l : logits) total += (l = std::exp(l - peak));
  std::vector<double> out(d, 0.0);
  for (std::size_t j = 0; j < count; ++j) {
    for (std::size_t c = 0; c < d; ++c) out[c] += logits[j] / total * kv[j][c];
  }
  return out;
}

std::vector<double> affine(std::span<const double> x, const Tensor& w, const Tensor& b) {
  std::vector<double> out(w.dim(1));
  for (std::size_t j = 0; j < out.size(); ++j) {
    double acc = b[j];
    for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * w.at(i, j);
    out[j] = acc;
  }
  return out;
}

std::vector<double> relu(std::vector<double> v) {
  for (double& x : v) x = std::max(x, 0.0);
  return v;
}

std::vector<double> loop_layer_norm(const std::vector<double>& x, const ModelParams& p, double eps) {
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  std::vector<double> out(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) {
    out[c] = p.ln_gain[c] * (x[c] - mean) / std::sqrt(var + eps) + p.ln_bias[c];
  }
  return out;
}

// Slice-by-slice reference: l'_t = Attention(relu(MLP(x_t)), X'_t, X'_t), then
// layer_norm(l' + FFN(l')), computed without masks or batching.
std::vector<std::vector<double>> loop_interest_tracking(const Tensor& x, const ModelParams& p,
                                                        const ModelConfig& c) {
  const std::size_t m = x.rows();
  std::vector<std::vector<double>> rows(m);
  for (std::size_t t = 0; t < m; ++t) rows[t].assign(x.row(t).begin(), x.row(t).end());
  std::vector<std::vector<double>> out(m);
  for (std::size_t t = 0; t < m; ++t) {
    const auto query = relu(affine(rows[t], p.itl_query_weight, p.itl_query_bias));
    const auto instant = loop_attention(query, rows, t + 1);
    const auto ffn = affine(relu(affine(instant, p.ffn_w1, p.ffn_b1)), p.ffn_w2, p.ffn_b2);
    std::vector<double> sum(instant.size());
    for (std::size_t c = 0; c < sum.size(); ++c) sum[c] = instant[c] + ffn[c];
    out[t] = loop_layer_norm(sum, p, c.layer_norm_eps);
  }
  return out;
}

TEST(EmbedTest, ZeroParamsGiveZeroMatrix) {
  const ModelConfig c = toy_config();
  const ModelParams p = ModelParams::zeros(c);
  const std::vector<data::ItemId> s = {3, 1, 4, 1};
  const Tensor x = embed_session(s, p, c);
  EXPECT_EQ(x.shape(), (num::Shape{4, c.embed_dim}));
  for (double v : x.values()) EXPECT_EQ(v, 0.0);
}

TEST(EmbedTest, SingleItemIsItemPlusFirstPosition) {
  const ModelConfig c = toy_config();
  const ModelParams p = random_params(c, 1);
  const std::vector<data::ItemId> s = {7};
  const Tensor x = embed_session(s, p, c);
  for (std::size_t k = 0; k < c.embed_dim; ++k) {
    EXPECT_EQ(x[k], p.item_embed.at(7, k) + p.pos_embed.at(0, k));
  }
}

TEST(EmbedTest, LongSessionKeepsLastMaxLenItems) {
  ModelConfig c = toy_config(100, 4, 50);
  const ModelParams p = random_params(c, 2);
  std::vector<data::ItemId> s(73);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = (i * 7) % 100;
  const Tensor x = embed_session(s, p, c);
  ASSERT_EQ(x.rows(), 50U);
  for (std::size_t t = 0; t < 50; ++t) {
    const data::ItemId item = s[23 + t];
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_EQ(x.at(t, k), p.item_embed.at(item, k) + p.pos_embed.at(t, k));
    }
  }
}

TEST(EmbedTest, InvalidSessionsAreDataErrors) {
  const ModelConfig c = toy_config();
  const ModelParams p = random_params(c, 3);
  const std::vector<data::ItemId> empty;
  const std::vector<data::ItemId> bad = {1, 30};
  EXPECT_THROW(embed_session(empty, p, c), DataError);
  EXPECT_THROW(embed_session(bad, p, c), DataError);
}

TEST(AttentionTest, SingleKeyReturnsItsValue) {
  const Tensor v = Tensor::matrix({{0.3, -2.0, 5.0}});
  const Tensor out = attention(Tensor::vector({9, -4, 1}), Tensor::matrix({{1, 2, 3}}), v);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(out[k], v[k]);
}

TEST(AttentionTest, SaturatesOnAlignedKey) {
  const Tensor keys = Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  const Tensor values = Tensor::matrix({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
  const Tensor out = attention(Tensor::vector({500, 0, 0}), keys, values);
  EXPECT_NEAR(out[0], 1.0, 1e-12);
  EXPECT_NEAR(out[1], 2.0, 1e-12);
  EXPECT_NEAR(out[2], 3.0, 1e-12);
}

TEST(AttentionTest, TwoDimensionalHandExample) {
  const Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor out = attention(Tensor::vector({1, 0}), eye, eye);
  const double a = std::exp(1.0 / std::sqrt(2.0));
  EXPECT_NEAR(out[0], a / (a + 1.0), 1e-15);
  EXPECT_NEAR(out[1], 1.0 / (a + 1.0), 1e-15);
  EXPECT_NEAR(out[0], 0.6698, 5e-5);
  EXPECT_NEAR(out[1], 0.3302, 5e-5);
}

TEST(AttentionTest, FullyMaskedQueryRowThrows) {
  const Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
  num::Mask mask({2, 2}, true);
  mask.keep[2] = mask.keep[3] = 0;
  EXPECT_THROW(attention(eye, eye, eye, &mask), DegenerateRowError);
}

TEST(InterestTrackingTest, SingleItemSession) {
  const ModelConfig c = toy_config();
  const ModelParams p = random_params(c, 4);
  const std::vector<data::ItemId> s = {5};
  const Tensor x = embed_session(s, p, c);
  const Tensor l = interest_tracking(x, p, c);
  std::vector<double> x1(x.values().begin(), x.values().end());
  const auto ffn = affine(relu(affine(x1, p.ffn_w1, p.ffn_b1)), p.ffn_w2, p.ffn_b2);
  for (std::size_t k = 0; k < x1.size(); ++k) x1[k] += ffn[k];
  const auto expected = loop_layer_norm(x1, p, c.layer_norm_eps);
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_NEAR(l[k], expected[k], 1e-14);
}

TEST(InterestTrackingTest, MaskedBatchMatchesSliceLoopWithIdentityWeights) {
  ModelConfig c = toy_config(10, 4, 6);
  ModelParams p = ModelParams::zeros(c);
  for (std::size_t i = 0; i < 4; ++i) {
    p.itl_query_weight.at(i, i) = p.ffn_w1.at(i, i) = p.ffn_w2.at(i, i) = 1.0;
    p.ln_gain[i] = 1.0;
  }
  const Tensor x = Tensor::matrix({{0.5, -0.2, 0.9, 0.1}, {-0.4, 0.8, 0.3, -0.6}});
  const Tensor l = interest_tracking(x, p, c);
  const auto expected = loop_interest_tracking(x, p, c);
  for (std::size_t t = 0; t < 2; ++t) {
    for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(l.at(t, k), expected[t][k], 1e-15);
  }
}

TEST(InterestTrackingTest, MaskedBatchMatchesSliceLoopWithRandomWeights) {
  const ModelConfig c = toy_config(30, 8, 6);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ModelParams p = random_params(c, seed);
    num::Rng rng(seed + 100);
    Tensor x({6, 8});
    num::fill_uniform(x, -1.0, 1.0, rng);
    const Tensor l = interest_tracking(x, p, c);
    const auto expected = loop_interest_tracking(x, p, c);
    for (std::size_t t = 0; t < 6; ++t) {
      for (std::size_t k = 0; k < 8; ++k) EXPECT_NEAR(l.at(t, k), expected[t][k], 1e-12);
    }
  }
}

TEST(InterestTrackingTest, PerturbingLaterPositionsLeavesEarlierRowsUnchanged) {
  const ModelConfig c = toy_config(30, 8, 6);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ModelParams p = random_params(c, seed);
    num::Rng rng(seed);
    Tensor x({6, 8});
    num::fill_uniform(x, -1.0, 1.0, rng);
    const Tensor base = interest_tracking(x, p, c);
    for (std::size_t u = 1; u < 6; ++u) {
      Tensor bumped = x;
      for (std::size_t k = 0; k < 8; ++k) bumped.at(u, k) += 0.5 + 0.1 * k;
      const Tensor out = interest_tracking(bumped, p, c);
      for (std::size_t t = 0; t < u; ++t) {
        for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(out.at(t, k), base.at(t, k));
      }
      bool changed = false;
      for (std::size_t k = 0; k < 8; ++k) changed = changed || out.at(u, k) != base.at(u, k);
      EXPECT_TRUE(changed);
    }
  }
}

TEST(InterestEnhancingTest, SingleInterestIsReturned) {
  const Tensor l = Tensor::matrix({{0.1, -0.7, 2.0}});
  const Tensor o = interest_enhancing(l);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(o[k], l[k]);
}

TEST(InterestEnhancingTest, IdenticalRowsGiveThatRow) {
  const Tensor l = Tensor::matrix({{0.25, -0.5}, {0.25, -0.5}, {0.25, -0.5}});
  const Tensor o = interest_enhancing(l);
  EXPECT_NEAR(o[0], 0.25, 1e-16);
  EXPECT_NEAR(o[1], -0.5, 1e-16);
}

TEST(InterestEnhancingTest, OutputIsConvexCombinationOfInterests) {
  num::Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor l({3, 5});
    num::fill_uniform(l, -2.0, 2.0, rng);
    const Tensor o = interest_enhancing(l);
    std::vector<double> logits(3);
    for (std::size_t j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < 5; ++k) dot += l.at(2, k) * l.at(j, k);
      logits[j] = std::exp(dot / std::sqrt(5.0));
    }
    const double total = logits[0] + logits[1] + logits[2];
    double weight_sum = 0.0;
    for (double& w : logits) {
      w /= total;
      EXPECT_GE(w, 0.0);
      weight_sum += w;
    }
    EXPECT_NEAR(weight_sum, 1.0, 1e-15);
    for (std::size_t k = 0; k < 5; ++k) {
      const double expected = logits[0] * l.at(0, k) + logits[1] * l.at(1, k) + logits[2] * l.at(2, k);
      EXPECT_NEAR(o[k], expected, 1e-13);
      const double lo = std::min({l.at(0, k), l.at(1, k), l.at(2, k)});
      const double hi = std::max({l.at(0, k), l.at(1, k), l.at(2, k)});
      EXPECT_GE(o[k], lo - 1e-15);
      EXPECT_LE(o[k], hi + 1e-15);
    }
  }
}

TEST(ScoreTest, IdenticalItemEmbeddingsGiveUniformScores) {
  ModelConfig c = toy_config(7, 3, 4);
  ModelParams p = ModelParams::zeros(c);
  for (std::size_t i = 0; i < 7; ++i) p.item_embed.row(i)[0] = 2.0, p.item_embed.row(i)[1] = -1.0;
  const Tensor y = score(Tensor::vector({0.3, 0.1, 0.9}), p, c);
  for (double v : y.values()) EXPECT_NEAR(v, 1.0 / 7.0, 1e-15);
}

TEST(ScoreTest, ParallelTargetWithOrthogonalRest) {
  const std::size_t n = 5;
  ModelConfig c = toy_config(n, n, 4);
  ModelParams p = ModelParams::zeros(c);
  for (std::size_t i = 0; i < n; ++i) p.item_embed.at(i, i) = 1.0 + i;
  Tensor o(num::Shape{n});
  o[2] = 4.2;
  const Tensor y = score(o, p, c);
  const double e = std::exp(1.0);
  EXPECT_NEAR(y[2], e / (e + n - 1), 1e-15);
  for (std::size_t i : {0, 1, 3, 4}) EXPECT_NEAR(y[i], 1.0 / (e + n - 1), 1e-15);
}

TEST(ScoreTest, PositiveRescalingOfSessionIsInvariant) {
  const ModelConfig c = toy_config();
  const ModelParams p = random_params(c, 8);
  num::Rng rng(2);
  Tensor o({c.embed_dim});
  num::fill_uniform(o, -1.0, 1.0, rng);
  const Tensor base = score(o, p, c);
  for (double factor : {1e-3, 0.5, 7.0, 1e4}) {
    Tensor scaled = o;
    for (double& v : scaled.values()) v *= factor;
    const Tensor y = score(scaled, p, c);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], base[i], 1e-15);
  }
}

TEST(ScoreTest, ZeroSessionIsNormalizationError) {
  const ModelConfig c = toy_config();
  const ModelParams p = random_params(c, 8);
  EXPECT_THROW(score(Tensor({c.embed_dim}), p, c), NormalizationError);
}

TEST(ScoreTest, TemperatureBoundsLogits) {
  ModelConfig c = toy_config(12, 8, 4);
  c.score_temperature = 0.25;
  const ModelParams p = random_params(c, 5);
  num::Rng rng(5);
  Tensor o({8});
  num::fill_uniform(o, -1.0, 1.0, rng);
  const Tensor y = score(o, p, c);
  const auto [lo, hi] = std::minmax_element(y.values().begin(), y.values().end());
  EXPECT_LE(std::log(*hi / *lo), 2.0 / c.score_temperature + 1e-12);
}

TEST(ForwardTest, BatchOfOneMatchesUnbatchedPath) {
  const ModelConfig c = toy_config();
  const ModelParams p = random_params(c, 9);
  const std::vector<data::Session> s = {{{17}, 3}};
  const auto traces = forward(data::collate(s, c.max_len), p, c);
  ASSERT_EQ(traces.size(), 1U);
  const Tensor x = embed_session(s[0].items, p, c);
  const Tensor l = interest_tracking(x, p, c);
  const Tensor o = interest_enhancing(l);
  const Tensor y = score(o, p, c);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(traces[0].scores[i], y[i]);
  for (std::size_t i = 0; i < o.size(); ++i) EXPECT_EQ(traces[0].session[i], o[i]);
}

TEST(ForwardTest, PaddedBatchEqualsSeparateRuns) {
  const ModelConfig c = toy_config();
  const ModelParams p = random_params(c, 10);
  const std::vector<data::Session> sessions = {{{1, 2}, 0}, {{3, 4, 5, 6, 7}, 0}};
  const auto batched = forward(data::collate(sessions, c.max_len), p, c);
  for (std::size_t b = 0; b < 2; ++b) {
    const auto alone = forward(data::collate(std::span(&sessions[b], 1), c.max_len), p, c);
    for (std::size_t i = 0; i < c.num_items; ++i) {
      EXPECT_EQ(batched[b].scores[i], alone[0].scores[i]);
    }
    EXPECT_EQ(batched[b].interests.shape(), alone[0].interests.shape());
  }
}

TEST(ForwardTest, ScoreRowsSumToOne) {
  const ModelConfig c = toy_config();
  const ModelParams p = random_params(c, 11);
  const auto sessions = random_sessions(16, 1, 6, c.num_items, 12);
  for (const auto& trace : forward(data::collate(sessions, c.max_len), p, c)) {
    EXPECT_NEAR(std::accumulate(trace.scores.values().begin(), trace.scores.values().end(), 0.0),
                1.0, 1e-9);
  }
}

TEST(ForwardTest, TrainingModeDropoutIsSeedDeterministic) {
  ModelConfig c = toy_config();
  c.dropout_rate = 0.3;
  const ModelParams p = random_params(c, 12);
  const auto sessions = random_sessions(4, 2, 6, c.num_items, 4);
  const auto batch = data::collate(sessions, c.max_len);
  num::Rng a(1), b(1);
  const auto first = forward(batch, p, c, true, a);
  const auto second = forward(batch, p, c, true, b);
  const auto eval = forward(batch, p, c);
  bool differs_from_eval = false;
  for (std::size_t s = 0; s < first.size(); ++s) {
    for (std::size_t i = 0; i < c.num_items; ++i) {
      EXPECT_EQ(first[s].scores[i], second[s].scores[i]);
      differs_from_eval = differs_from_eval || first[s].scores[i] != eval[s].scores[i];
    }
  }
  EXPECT_TRUE(differs_from_eval);
}

TEST(ForwardTest, WidthBeyondMaxLenIsRejected) {
  const ModelConfig c = toy_config(30, 8, 3);
  const ModelParams p = random_params(c, 1);
  const std::vector<data::Session> s = {{{1, 2, 3, 4}, 0}};
  EXPECT_THROW(forward(data::collate(s), p, c), DataError);
  EXPECT_NO_THROW(forward(data::collate(s, c.max_len), p, c));
}

TEST(ModelProperty, RelabelingItemsPermutesScores) {
  const ModelConfig c = toy_config();
  const ModelParams p = random_params(c, 13);
  std::vector<data::ItemId> perm(c.num_items);
  std::iota(perm.begin(), perm.end(), data::ItemId{0});
  std::mt19937_64 rng(13);
  std::shuffle(perm.begin(), perm.end(), rng);

  ModelParams q = p;
  for (std::size_t i = 0; i < c.num_items; ++i) {
    for (std::size_t k = 0; k < c.embed_dim; ++k) q.item_embed.at(perm[i], k) = p.item_embed.at(i, k);
  }
  auto sessions = random_sessions(8, 1, 6, c.num_items, 14);
  auto relabeled = sessions;
  for (auto& s : relabeled) {
    for (auto& i : s.items) i = perm[i];
  }
  const auto base = forward(data::collate(sessions, c.max_len), p, c);
  const auto moved = forward(data::collate(relabeled, c.max_len), q, c);
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    for (std::size_t i = 0; i < c.num_items; ++i) {
      EXPECT_NEAR(moved[s].scores[perm[i]], base[s].scores[i], 1e-15);
    }
  }
}

TEST(ModelProperty, ArgmaxInvariantToItemRowRescaling) {
  const ModelConfig c = toy_config();
  const ModelParams p = random_params(c, 15);
  num::Rng rng(15);
  Tensor o({c.embed_dim});
  num::fill_uniform(o, -1.0, 1.0, rng);
  ModelParams q = p;
  std::uniform_real_distribution<double> factor(0.01, 100.0);
  for (std::size_t i = 0; i < c.num_items; ++i) {
    const double f = factor(rng);
    for (double& v : q.item_embed.row(i)) v *= f;
  }
  Tensor scaled_o = o;
  for (double& v : scaled_o.values()) v *= 3.7;
  const Tensor a = score(o, p, c);
  const Tensor b = score(scaled_o, q, c);
  EXPECT_EQ(std::max_element(a.values().begin(), a.values().end()) - a.values().begin(),
            std::max_element(b.values().begin(), b.values().end()) - b.values().begin());
}

TEST(ParamsTest, CountMatchesShapes) {
  ModelConfig c = toy_config(36968, 100, 50);
  c.ffn_dim = 100;
  EXPECT_EQ(parameter_count(c), 36968U * 100 + 50 * 100 + 100 * 100 + 100 + 2 * (100 * 100) + 100 +
                                    100 + 2 * 100);
}

TEST(ParamsTest, InitializationFollowsScheme) {
  const ModelConfig c = toy_config(40, 16, 5);
  num::Rng rng(3);
  const ModelParams p = ModelParams::initialize(c, rng);
  const double bound = 1.0 / 4.0;
  for (const Tensor* t : {&p.item_embed, &p.pos_embed, &p.itl_query_weight, &p.ffn_w1, &p.ffn_w2}) {
    for (double v : t->values()) {
      EXPECT_GE(v, -bound);
      EXPECT_LE(v, bound);
    }
  }
  for (const Tensor* t : {&p.itl_query_bias, &p.ffn_b1, &p.ffn_b2, &p.ln_bias}) {
    for (double v : t->values()) EXPECT_EQ(v, 0.0);
  }
  for (double v : p.ln_gain.values()) EXPECT_EQ(v, 1.0);
  EXPECT_NO_THROW(p.check_shapes(c));
  ModelConfig bigger = c;
  bigger.max_len = 6;
  EXPECT_THROW(p.check_shapes(bigger), DimensionError);
}

TEST(ConfigTest, RejectsInvalidValues) {
  ModelConfig c = toy_config();
  EXPECT_NO_THROW(c.validate());
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = toy_config();
  c.score_temperature = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = toy_config();
  c.max_len = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

}  // namespace
}  // namespace mtaw::model
