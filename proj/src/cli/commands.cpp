#include "mtaw/cli/commands.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "mtaw/data/io.hpp"
#include "mtaw/errors.hpp"
#include "mtaw/eval/evaluate.hpp"
#include "mtaw/model/mtaw.hpp"
#include "mtaw/training/checkpoint.hpp"

namespace mtaw::cli {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

struct LoadedData {
  data::Vocabulary vocab;
  data::Dataset train;
  data::Dataset test;
};

LoadedData load_data(const RunConfig& config) {
  LoadedData d;
  auto [train, test] = data::load_splits(config.train_file, config.test_file, config.format,
                                         d.vocab, config.model.max_len);
  d.train = std::move(train);
  d.test = std::move(test);
  spdlog::info("loaded {} train / {} test samples over {} items", d.train.size(), d.test.size(),
               d.vocab.size());
  return d;
}

/// Sets the catalog size from the data, warning when the config disagreed.
model::ModelConfig model_for(const RunConfig& config, std::size_t num_items) {
  model::ModelConfig m = config.model;
  if (m.num_items != 0 && m.num_items != num_items) {
    spdlog::warn("num_items {} in the configuration replaced by {} from the data", m.num_items,
                 num_items);
  }
  m.num_items = num_items;
  m.validate();
  return m;
}

train::Checkpoint load_for_inference(const std::filesystem::path& path, data::Vocabulary& vocab) {
  train::Checkpoint ckpt = train::load_checkpoint(path);
  if (ckpt.vocabulary.size() != ckpt.model.num_items) {
    throw CheckpointError(CheckpointError::Kind::kCorrupt,
                          fmt::format("checkpoint vocabulary has {} tokens for {} items",
                                      ckpt.vocabulary.size(), ckpt.model.num_items));
  }
  vocab = data::Vocabulary(ckpt.vocabulary);
  vocab.freeze();
  return ckpt;
}

}  // namespace

int run_guarded(const std::function<void()>& body, std::ostream& err) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    fmt::print(err, "configuration error: {}\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    fmt::print(err, "data error: {}\n", e.what());
    return kExitData;
  } catch (const NumericDivergence& e) {
    fmt::print(err, "numeric divergence: {}\n", e.what());
    return kExitDivergence;
  } catch (const CheckpointError& e) {
    fmt::print(err, "checkpoint error: {}\n", e.what());
    return kExitCheckpoint;
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitFailure;
  }
}

std::string git_blob_sha1(const std::filesystem::path& path) {
  const std::string body = read_file(path);
  const std::string header = fmt::format("blob {}", body.size());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size() + 1) == 1 &&
                  EVP_DigestUpdate(ctx, body.data(), body.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw Error("SHA-1 computation failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

TrainArtifacts cmd_train(RunConfig config, std::ostream& out) {
  config.validate(true);
  LoadedData d = load_data(config);
  const model::ModelConfig model_config = model_for(config, d.vocab.size());
  config.model.num_items = model_config.num_items;

  std::filesystem::create_directories(config.output_dir);
  TrainArtifacts paths{config.output_dir / "best.ckpt", config.metric_log(),
                       config.output_dir / "manifest.txt"};
  if (paths.metric_log.has_parent_path()) {
    std::filesystem::create_directories(paths.metric_log.parent_path());
  }
  std::ofstream log(paths.metric_log, std::ios::trunc);
  if (!log) throw ConfigError("cannot write metric log " + paths.metric_log.string());
  log << train::metric_log_header() << '\n' << std::flush;

  train::FitOptions options;
  options.on_epoch = [&](const train::EpochRecord& rec) {
    log << train::metric_log_row(rec) << '\n' << std::flush;
    spdlog::info("epoch {} loss {:.5f} P@20 {:.2f} MRR@20 {:.2f} ({:.1f}s)", rec.epoch, rec.loss,
                 100.0 * rec.metrics.p(20), 100.0 * rec.metrics.mrr(20), rec.seconds);
  };
  train::FitResult result =
      train::fit(d.train, d.test, model_config, config.train, config.loss, std::move(options));

  train::Checkpoint ckpt;
  ckpt.model = model_config;
  ckpt.loss = config.loss;
  ckpt.train = config.train;
  ckpt.params = std::move(result.best_params);
  ckpt.epoch = result.best_epoch;
  ckpt.vocabulary = d.vocab.originals();
  train::save_checkpoint(ckpt, paths.checkpoint);

  std::string manifest = config.to_text();
  manifest += fmt::format("train_file.sha1={}\n", git_blob_sha1(config.train_file));
  manifest += fmt::format("test_file.sha1={}\n", git_blob_sha1(config.test_file));
  manifest += fmt::format("best_epoch={}\n", result.best_epoch);
  manifest += fmt::format("checkpoint.sha1={}\n", git_blob_sha1(paths.checkpoint));
  write_file(paths.manifest, manifest);

  fmt::print(out, "best epoch {} of {}; checkpoint {}\n", result.best_epoch, config.train.epochs,
             paths.checkpoint.string());
  return paths;
}

void cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& test_file,
              data::DatasetFormat format, std::ostream& out) {
  data::Vocabulary vocab;
  const train::Checkpoint ckpt = load_for_inference(checkpoint, vocab);
  const data::Dataset test =
      data::load_dataset(test_file, format, vocab, data::Split::kTest, ckpt.model.max_len);
  const eval::MetricReport report = eval::evaluate(ckpt.params, ckpt.model, test);
  fmt::print(out, "{}\n", eval::percent_fields(report));
}

void cmd_sweep_gamma(const RunConfig& config, std::vector<double> gammas, std::ostream& out) {
  if (gammas.empty()) throw ConfigError("sweep needs at least one gamma value");
  if (std::find(gammas.begin(), gammas.end(), 0.0) == gammas.end()) gammas.insert(gammas.begin(), 0.0);
  for (double g : gammas) {
    train::LossConfig{g}.validate();
  }
  config.validate(true);
  const LoadedData d = load_data(config);
  const model::ModelConfig model_config = model_for(config, d.vocab.size());

  fmt::print(out, "gamma,status,best_epoch,{}\n", eval::metric_header());
  for (double g : gammas) {
    train::LossConfig loss = config.loss;
    loss.gamma = g;
    try {
      const train::FitResult r = train::fit(d.train, d.test, model_config, config.train, loss);
      const eval::MetricReport best =
          r.best_epoch == 0 ? eval::evaluate(r.best_params, model_config, d.test)
                        : r.log[r.best_epoch - 1].metrics;
      fmt::print(out, "{},ok,{},{}\n", g, r.best_epoch, eval::metric_fields(best));
    } catch (const std::exception& e) {
      spdlog::error("gamma {} failed: {}", g, e.what());
      std::string reason = e.what();
      std::replace(reason.begin(), reason.end(), ',', ';');
      fmt::print(out, "{},failed: {},,,,,\n", g, reason);
    }
    out.flush();
  }
}

void cmd_recommend(const std::filesystem::path& checkpoint,
                   const std::vector<std::string>& session, std::size_t k, std::ostream& out) {
  if (k == 0) throw ConfigError("k must be at least 1");
  if (session.empty()) throw DataError("session is empty");
  data::Vocabulary vocab;
  const train::Checkpoint ckpt = load_for_inference(checkpoint, vocab);
  data::Session s;
  for (const auto& token : session) {
    const auto id = vocab.find(token);
    if (!id) throw DataError("unknown item token '" + token + "'");
    s.items.push_back(*id);
  }
  const std::vector<data::Session> one = {s};
  const auto traces = model::forward(data::collate(one, ckpt.model.max_len), ckpt.params, ckpt.model);
  const auto scores = traces[0].scores.values();
  std::vector<data::ItemId> order(scores.size());
  std::iota(order.begin(), order.end(), data::ItemId{0});
  k = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](data::ItemId a, data::ItemId b) {
                      return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
                    });
  for (std::size_t i = 0; i < k; ++i) {
    fmt::print(out, "{}, {:.17g}\n", vocab.original(order[i]), scores[order[i]]);
  }
}

TimingReport cmd_timing(const RunConfig& config, std::size_t epochs, std::size_t synthetic_samples,
                        std::ostream& out) {
  const bool from_file = !config.train_file.empty();
  if (from_file && !std::filesystem::is_regular_file(config.train_file)) {
    throw ConfigError("train_file '" + config.train_file.string() + "' does not exist");
  }
  config.validate(false);

  TimingReport report;
  report.parameters = model::parameter_count(config.model);
  fmt::print(out, "trainable parameters: {} ({:.2f}M)\n", report.parameters,
             static_cast<double>(report.parameters) / 1e6);
  if (epochs == 0) return report;

  data::Dataset train;
  model::ModelConfig model_config = config.model;
  if (from_file) {
    data::Vocabulary vocab;
    train = data::load_dataset(config.train_file, config.format, vocab, data::Split::kTrain,
                               config.model.max_len);
    model_config = model_for(config, vocab.size());
  } else {
    data::SyntheticSpec spec;
    spec.num_items = config.model.num_items;
    spec.max_length = std::min<std::size_t>(config.model.max_len, 10);
    std::mt19937_64 rng(config.train.seed);
    train = data::generate_synthetic(spec, synthetic_samples, rng);
  }
  report.samples = train.size();

  num::Rng rng(config.train.seed);
  model::ModelParams params = model::ModelParams::initialize(model_config, rng);
  train::OptimizerState state = train::OptimizerState::for_params(params);
  double total = 0.0;
  for (std::size_t e = 0; e < epochs; ++e) {
    total += train::train_epoch(train, params, state, model_config, config.train, config.loss, rng)
                 .seconds;
  }
  report.seconds_per_epoch = total / static_cast<double>(epochs);
  fmt::print(out, "samples: {}\nseconds per epoch: {:.3f}\n", report.samples,
             report.seconds_per_epoch);
  return report;
}

void cmd_synth(const data::SyntheticSpec& spec, std::size_t train_size, std::size_t test_size,
               std::uint64_t seed, const std::filesystem::path& out_dir, std::ostream& out) {
  spec.validate();
  if (train_size == 0 || test_size == 0) throw ConfigError("split sizes must be positive");
  std::mt19937_64 rng(seed);
  const data::Dataset train = data::generate_synthetic(spec, train_size, rng, data::Split::kTrain);
  const data::Dataset test = data::generate_synthetic(spec, test_size, rng, data::Split::kTest);
  std::filesystem::create_directories(out_dir);
  const data::Vocabulary vocab = data::synthetic_vocabulary(spec.num_items);
  data::save_native(train, vocab, out_dir / "train.txt");
  data::save_native(test, vocab, out_dir / "test.txt");
  fmt::print(out, "wrote {} train and {} test samples over {} items to {}\n", train.size(),
             test.size(), spec.num_items, out_dir.string());
}

}  // namespace mtaw::cli
