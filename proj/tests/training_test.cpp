#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <unistd.h>

#include "mtaw/data/synthetic.hpp"
#include "mtaw/errors.hpp"
#include "mtaw/eval/evaluate.hpp"
#include "mtaw/numerics/gradcheck.hpp"
#include "mtaw/numerics/ops.hpp"
#include "mtaw/training/adam.hpp"
#include "mtaw/training/checkpoint.hpp"
#include "mtaw/training/loss.hpp"
#include "mtaw/training/trainer.hpp"
#include "model_gradcheck.hpp"
#include "test_util.hpp"

namespace mtaw::train {
namespace {

using num::Tensor;

Tensor random_distribution(std::size_t rows, std::size_t n, std::mt19937_64& rng) {
  Tensor logits({rows, n});
  num::fill_uniform(logits, -4.0, 4.0, rng);
  return num::softmax(logits);
}

Tensor single_prob(double p) {
  // Two-item catalog with the target at index 0.
  return Tensor::matrix({{p, 1.0 - p}});
}

const std::vector<data::ItemId> kTargetZero = {0};

TEST(AwLossTest, ZeroGammaIsMeanCrossEntropy) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t rows = 1 + rng() % 8;
    const Tensor s = random_distribution(rows, 50, rng);
    std::vector<data::ItemId> t(rows);
    for (auto& x : t) x = rng() % 50;
    double ce = 0.0;
    for (std::size_t i = 0; i < rows; ++i) ce -= std::log(s.at(i, t[i]));
    ce /= static_cast<double>(rows);
    EXPECT_NEAR(aw_loss(s, t, LossConfig{0.0}), ce, 1e-12);
    EXPECT_NEAR(cross_entropy(s, t), ce, 1e-12);
  }
}

TEST(AwLossTest, PerfectPredictionsGiveZero) {
  const Tensor s = Tensor::matrix({{1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}});
  const std::vector<data::ItemId> t = {0, 2};
  for (double gamma : {0.0, 0.5, 2.0, 6.0}) EXPECT_EQ(aw_loss(s, t, LossConfig{gamma}), 0.0);
}

TEST(AwLossTest, HalfProbabilityGammaTwo) {
  EXPECT_NEAR(aw_loss(single_prob(0.5), kTargetZero, LossConfig{2.0}), 0.693147, 1e-6);
  EXPECT_NEAR(aw_loss(single_prob(0.5), kTargetZero, LossConfig{2.0}), std::log(2.0), 1e-15);
}

TEST(AwLossTest, NinetyPercentGammaSix) {
  // 0.2^6 * -ln 0.9 evaluated with 40-digit arithmetic.
  const double oracle = 6.743073002100883e-06;
  EXPECT_NEAR(aw_loss(single_prob(0.9), kTargetZero, LossConfig{6.0}), oracle, 1e-18);
  EXPECT_NEAR(aw_loss(single_prob(0.9), kTargetZero, LossConfig{6.0}), 6.744e-6, 1e-8);
}

TEST(AwLossTest, FactorDecreasesInProbability) {
  for (double gamma : {0.5, 1.0, 2.0, 6.0}) {
    double prev = modulating_factor(0.0, gamma);
    for (int i = 1; i <= 100; ++i) {
      const double w = modulating_factor(i / 100.0, gamma);
      EXPECT_LT(w, prev);
      prev = w;
    }
  }
  EXPECT_EQ(modulating_factor(1.0, 0.0), 1.0);
}

TEST(AwLossTest, NonNegativeAndClampedAtFloor) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor s = random_distribution(4, 10, rng);
    const std::vector<data::ItemId> t = {1, 2, 3, 4};
    EXPECT_GT(aw_loss(s, t, LossConfig{3.0}), 0.0);
  }
  const double at_zero = aw_loss(single_prob(0.0), kTargetZero, LossConfig{0.0});
  EXPECT_NEAR(at_zero, -std::log(kProbFloor), 1e-9);
}

TEST(AwLossTest, InvalidInputsThrow) {
  const Tensor s = single_prob(0.5);
  const std::vector<data::ItemId> outside = {2};
  const std::vector<data::ItemId> two = {0, 1};
  EXPECT_THROW(aw_loss(s, outside, LossConfig{}), DataError);
  EXPECT_THROW(aw_loss(s, two, LossConfig{}), DimensionError);
  EXPECT_THROW(aw_loss(s, kTargetZero, LossConfig{-1.0}), ConfigError);
}

TEST(AwLossTest, GraphValueMatchesTensorValue) {
  std::mt19937_64 rng(3);
  const Tensor s = random_distribution(5, 12, rng);
  const std::vector<data::ItemId> t = {0, 3, 5, 7, 11};
  for (auto mode : {FactorGradient::kConstant, FactorGradient::kFull}) {
    const LossConfig cfg{4.0, mode};
    num::Graph g;
    EXPECT_EQ(g.value(aw_loss(g, g.constant(s), t, cfg)).item(), aw_loss(s, t, cfg));
  }
}

// d loss / d scores against finite differences of the matching function.
TEST(AwLossTest, ScoreGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  const std::vector<data::ItemId> t = {2, 0, 5};
  for (double gamma : {0.0, 0.5, 2.0, 6.0}) {
    const Tensor s = random_distribution(3, 6, rng);
    std::vector<double> frozen;
    for (std::size_t i = 0; i < t.size(); ++i) frozen.push_back(modulating_factor(s.at(i, t[i]), gamma));
    for (auto mode : {FactorGradient::kConstant, FactorGradient::kFull}) {
      const LossConfig cfg{gamma, mode};
      num::Graph g;
      Tensor x = s;
      x.set_requires_grad(true);
      g.backward(aw_loss(g, g.parameter(x), t, cfg));
      const Tensor numeric = num::finite_diff_grad(
          [&](const Tensor& y) {
            if (mode == FactorGradient::kFull) return aw_loss(y, t, cfg);
            num::Graph h;
            return h.value(weighted_nll(h, h.constant(y), t, frozen)).item();
          },
          s, 1e-7);
      EXPECT_LT(num::max_relative_error(std::as_const(x).grad(), numeric.values(), 1e-8), 1e-6)
          << "gamma " << gamma << " full " << (mode == FactorGradient::kFull);
    }
  }
}

TEST(AwLossTest, FullModelGradientMatchesFiniteDifferences) {
  const model::ModelConfig c = testing::toy_config(30, 8, 6);
  const model::ModelParams p = testing::random_params(c, 21);
  const auto sessions = testing::random_sessions(4, 1, 6, c.num_items, 22);
  const auto batch = data::collate(sessions, c.max_len);
  for (auto mode : {FactorGradient::kConstant, FactorGradient::kFull}) {
    for (const auto& e : testing::model_gradient_errors(p, c, batch, LossConfig{2.0, mode})) {
      EXPECT_LT(e.max_relative_error, 1e-3) << e.name;
      EXPECT_GT(e.max_abs_grad, 0.0) << e.name;
    }
  }
}

TEST(AdamTest, ZeroGradientLeavesParamsAndCountsStep) {
  Tensor w = Tensor::vector({1.0, -2.0, 3.0});
  w.zero_grad();
  std::vector<Tensor*> ps = {&w};
  auto state = OptimizerState::for_params(std::vector<const Tensor*>{&w});
  adam_step(ps, state, AdamConfig{});
  EXPECT_EQ(state.step, 1U);
  EXPECT_EQ(w[0], 1.0);
  EXPECT_EQ(w[1], -2.0);
  EXPECT_EQ(w[2], 3.0);
}

TEST(AdamTest, ConstantGradientMovesAboutLearningRatePerStep) {
  Tensor w = Tensor::vector({0.0});
  std::vector<Tensor*> ps = {&w};
  auto state = OptimizerState::for_params(std::vector<const Tensor*>{&w});
  const AdamConfig cfg{0.01};
  double prev = w[0];
  for (int i = 0; i < 200; ++i) {
    w.grad()[0] = 2.5;
    adam_step(ps, state, cfg);
    EXPECT_LT(w[0], prev);
    EXPECT_NEAR(prev - w[0], 0.01, 1e-6);
    prev = w[0];
  }
}

TEST(AdamTest, MatchesReferenceTraceOnQuadratic) {
  // x_{t+1} from the textbook recurrence on f = 1.5 x^2 + 0.5 x + 0.25 y^2,
  // lr 0.1, computed independently in float64.
  const double expected[10][2] = {
      {0.9000000002857143, -1.900000001},        {0.8003332950217772, -1.8001664876318761},
      {0.7012720055691454, -1.7006233943434113}, {0.6031317257989072, -1.6015048983797573},
      {0.5062762009242336, -1.5029557851889337}, {0.4111213248801099, -1.405131734864895},
      {0.31813772178029026, -1.3081995011333636}, {0.2278509304737052, -1.2123369494617406},
      {0.14083799812973308, -1.1177329161076315}, {0.05771919988249097, -1.0245868457678529}};
  Tensor w = Tensor::vector({1.0, -2.0});
  std::vector<Tensor*> ps = {&w};
  auto state = OptimizerState::for_params(std::vector<const Tensor*>{&w});
  for (int t = 0; t < 10; ++t) {
    w.grad()[0] = 3.0 * w[0] + 0.5;
    w.grad()[1] = 0.5 * w[1];
    adam_step(ps, state, AdamConfig{0.1});
    EXPECT_NEAR(w[0], expected[t][0], 1e-10);
    EXPECT_NEAR(w[1], expected[t][1], 1e-10);
  }
}

TEST(AdamTest, MissingGradientIsLogicError) {
  Tensor w = Tensor::vector({1.0});
  std::vector<Tensor*> ps = {&w};
  auto state = OptimizerState::for_params(std::vector<const Tensor*>{&w});
  EXPECT_THROW(adam_step(ps, state, AdamConfig{}), std::logic_error);
}

data::Dataset synthetic(std::size_t n, std::uint64_t seed, double noise = 0.0,
                        std::size_t items = 20) {
  data::SyntheticSpec spec;
  spec.num_items = items;
  spec.noise = noise;
  std::mt19937_64 rng(seed);
  return data::generate_synthetic(spec, n, rng);
}

model::ModelConfig small_model(std::size_t items = 20) {
  model::ModelConfig c = testing::toy_config(items, 16, 8);
  c.dropout_rate = 0.1;
  c.score_temperature = 0.1;
  return c;
}

TEST(TrainEpochTest, ZeroLearningRateLeavesParamsBitIdentical) {
  const auto ds = synthetic(60, 1);
  const auto c = small_model();
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.batch_size = 16;
  num::Rng rng(1);
  model::ModelParams p = model::ModelParams::initialize(c, rng);
  const model::ModelParams before = p;
  auto state = OptimizerState::for_params(p);
  train_epoch(ds, p, state, c, tc, LossConfig{2.0}, rng);
  const auto a = p.named();
  const auto b = before.named();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::equal(a[i].second->values().begin(), a[i].second->values().end(),
                           b[i].second->values().begin()))
        << a[i].first;
  }
}

TEST(TrainEpochTest, SameSeedSameLoss) {
  const auto ds = synthetic(80, 2);
  const auto c = small_model();
  TrainConfig tc;
  tc.batch_size = 16;
  auto run = [&] {
    num::Rng rng(9);
    model::ModelParams p = model::ModelParams::initialize(c, rng);
    auto state = OptimizerState::for_params(p);
    double loss = 0.0;
    for (int e = 0; e < 2; ++e) loss = train_epoch(ds, p, state, c, tc, LossConfig{2.0}, rng).mean_loss;
    return loss;
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainEpochTest, LossDecreasesOverFirstEpochs) {
  const auto ds = synthetic(100, 3);
  const auto c = small_model();
  TrainConfig tc;
  tc.batch_size = 10;
  tc.learning_rate = 0.01;
  num::Rng rng(4);
  model::ModelParams p = model::ModelParams::initialize(c, rng);
  auto state = OptimizerState::for_params(p);
  double prev = INFINITY;
  for (int e = 0; e < 5; ++e) {
    const double loss = train_epoch(ds, p, state, c, tc, LossConfig{0.0}, rng).mean_loss;
    EXPECT_LT(loss, prev) << "epoch " << e;
    prev = loss;
  }
}

TEST(TrainEpochTest, NonFiniteLossReportsBatch) {
  const auto ds = synthetic(20, 5);
  const auto c = small_model();
  num::Rng rng(5);
  model::ModelParams p = model::ModelParams::initialize(c, rng);
  p.ffn_b2[0] = NAN;
  auto state = OptimizerState::for_params(p);
  try {
    train_epoch(ds, p, state, c, TrainConfig{}, LossConfig{}, rng);
    FAIL() << "expected NumericDivergence";
  } catch (const NumericDivergence& e) {
    EXPECT_EQ(e.batch_index(), 0U);
    EXPECT_TRUE(std::isnan(e.loss()));
  }
}

TEST(TrainEpochTest, CatalogMismatchIsDataError) {
  const auto ds = synthetic(20, 5);
  const auto c = small_model(25);
  num::Rng rng(5);
  model::ModelParams p = model::ModelParams::initialize(c, rng);
  auto state = OptimizerState::for_params(p);
  EXPECT_THROW(train_epoch(ds, p, state, c, TrainConfig{}, LossConfig{}, rng), DataError);
}

TEST(FitTest, ZeroEpochsReturnsInitialParams) {
  const auto train_ds = synthetic(30, 6);
  const auto test_ds = synthetic(10, 7);
  const auto c = small_model();
  TrainConfig tc;
  tc.epochs = 0;
  const FitResult r = fit(train_ds, test_ds, c, tc, LossConfig{});
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(r.best_epoch, 0U);
  num::Rng rng(tc.seed);
  const auto init = model::ModelParams::initialize(c, rng);
  EXPECT_TRUE(std::equal(init.item_embed.values().begin(), init.item_embed.values().end(),
                         r.best_params.item_embed.values().begin()));
}

TEST(FitTest, LogHasOneRowPerEpochAndBestIsRetained) {
  const auto train_ds = synthetic(200, 8);
  const auto test_ds = synthetic(60, 9);
  const auto c = small_model();
  TrainConfig tc;
  tc.epochs = 6;
  tc.batch_size = 20;
  tc.learning_rate = 0.01;
  std::size_t callbacks = 0;
  FitOptions opts;
  opts.on_epoch = [&](const EpochRecord&) { ++callbacks; };
  const FitResult r = fit(train_ds, test_ds, c, tc, LossConfig{2.0}, opts);
  ASSERT_EQ(r.log.size(), 6U);
  EXPECT_EQ(callbacks, 6U);
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const auto& rec : r.log) {
    if (rec.metrics.mrr(20) > best) {
      best = rec.metrics.mrr(20);
      best_epoch = rec.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(eval::evaluate(r.best_params, c, test_ds), r.log[best_epoch - 1].metrics);
  EXPECT_EQ(eval::evaluate(r.final_params, c, test_ds), r.log.back().metrics);
}

TEST(FitTest, MetricRowSchema) {
  EpochRecord rec;
  rec.epoch = 3;
  rec.loss = 0.5;
  rec.metrics = eval::summarize(std::vector<std::size_t>{1, 30});
  rec.seconds = 1.25;
  EXPECT_EQ(metric_log_header(), "epoch,loss,P@10,MRR@10,P@20,MRR@20,seconds");
  EXPECT_EQ(metric_log_row(rec), "3,0.5,0.5,0.5,0.5,0.5,1.250");
}

TEST(FitTest, SelectionCutoffMustBeEvaluated) {
  const auto ds = synthetic(30, 6);
  FitOptions opts;
  opts.cutoffs = {10};
  EXPECT_THROW(fit(ds, ds, small_model(), TrainConfig{}, LossConfig{}, opts), ConfigError);
}

class CheckpointTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("mtaw_ckpt_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
    ckpt_.model = small_model();
    ckpt_.loss = LossConfig{6.0, FactorGradient::kFull};
    ckpt_.train.seed = 77;
    ckpt_.train.learning_rate = 0.0123;
    ckpt_.params = testing::random_params(ckpt_.model, 31);
    ckpt_.epoch = 4;
    ckpt_.vocabulary = {"alpha", "b", "", "x y"};
    auto state = OptimizerState::for_params(ckpt_.params);
    num::Rng rng(2);
    for (auto& t : state.m) num::fill_uniform(t, -1, 1, rng);
    for (auto& t : state.v) num::fill_uniform(t, 0, 1, rng);
    state.step = 12;
    ckpt_.optimizer = state;
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }

  std::string flip(std::size_t offset) {
    std::string bytes = encode_checkpoint(ckpt_);
    bytes[offset] = static_cast<char>(bytes[offset] ^ 0x40);
    return bytes;
  }

  static CheckpointError::Kind kind_of(std::string_view bytes) {
    try {
      decode_checkpoint(bytes);
    } catch (const CheckpointError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "decode succeeded";
    return CheckpointError::Kind::kIo;
  }

  std::filesystem::path dir_;
  Checkpoint ckpt_;
};

TEST_F(CheckpointTest, RoundTripIsBitwise) {
  const auto path = dir_ / "model.ckpt";
  save_checkpoint(ckpt_, path);
  const Checkpoint back = load_checkpoint(path);
  EXPECT_EQ(back.model, ckpt_.model);
  EXPECT_EQ(back.loss, ckpt_.loss);
  EXPECT_EQ(back.train, ckpt_.train);
  EXPECT_EQ(back.epoch, 4U);
  EXPECT_EQ(back.vocabulary, ckpt_.vocabulary);
  ASSERT_TRUE(back.optimizer.has_value());
  EXPECT_TRUE(*back.optimizer == *ckpt_.optimizer);
  const auto a = back.params.named();
  const auto b = ckpt_.params.named();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].second->shape(), b[i].second->shape());
    EXPECT_EQ(std::memcmp(a[i].second->data(), b[i].second->data(), a[i].second->size() * 8), 0)
        << a[i].first;
  }
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(ckpt_));
}

TEST_F(CheckpointTest, WithoutOptimizerState) {
  ckpt_.optimizer.reset();
  EXPECT_FALSE(decode_checkpoint(encode_checkpoint(ckpt_)).optimizer.has_value());
}

TEST_F(CheckpointTest, FlippedPayloadByteIsChecksumError) {
  const std::size_t size = encode_checkpoint(ckpt_).size();
  for (std::size_t offset : {std::size_t{20}, size / 2, size - 33, size - 1}) {
    EXPECT_EQ(kind_of(flip(offset)), CheckpointError::Kind::kChecksum) << offset;
  }
}

TEST_F(CheckpointTest, HeaderDamageHasDistinctKinds) {
  EXPECT_EQ(kind_of(flip(0)), CheckpointError::Kind::kCorrupt);
  EXPECT_EQ(kind_of(flip(8)), CheckpointError::Kind::kVersion);
  EXPECT_EQ(kind_of(flip(12)), CheckpointError::Kind::kCorrupt);
  const std::string bytes = encode_checkpoint(ckpt_);
  EXPECT_EQ(kind_of(std::string_view(bytes).substr(0, bytes.size() - 5)),
            CheckpointError::Kind::kCorrupt);
}

TEST_F(CheckpointTest, MissingFileIsIoError) {
  try {
    load_checkpoint(dir_ / "absent.ckpt");
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::kIo);
  }
}

TEST_F(CheckpointTest, LargerMaxLenIsShapeMismatch) {
  const auto path = dir_ / "model.ckpt";
  save_checkpoint(ckpt_, path);
  model::ModelConfig bigger = ckpt_.model;
  bigger.max_len += 2;
  try {
    load_checkpoint(path, bigger);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::kShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("pos_embed"), std::string::npos);
  }
  EXPECT_NO_THROW(load_checkpoint(path, ckpt_.model));
}

}  // namespace
}  // namespace mtaw::train
