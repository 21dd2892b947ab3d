// mtaw: train, evaluate and query session recommenders from the command line.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mtaw/cli/commands.hpp"
#include "mtaw/cli/run_config.hpp"
#include "mtaw/errors.hpp"

namespace {

using mtaw::cli::Setting;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("mtaw");
  logger->set_pattern("[%H:%M:%S] [%^%l%$] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("MTAW_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

/// Command-line overrides of run-config keys, kept in declaration order.
struct ConfigOptions {
  struct Flag {
    std::string flag, key, help;
    std::optional<std::string> value;
  };

  std::string config_file;
  std::vector<Flag> flags;
  std::vector<std::string> raw;

  void add(std::string flag, std::string key, std::string help) {
    flags.push_back({std::move(flag), std::move(key), std::move(help), std::nullopt});
  }

  void bind(CLI::App* cmd) {
    cmd->add_option("-c,--config", config_file, "key = value configuration file")
        ->check(CLI::ExistingFile);
    for (auto& f : flags) cmd->add_option(f.flag, f.value, f.help);
    cmd->add_option("--set", raw, "extra key=value setting (repeatable)");
  }

  mtaw::cli::RunConfig resolve() const {
    std::vector<Setting> file;
    if (!config_file.empty()) file = mtaw::cli::read_settings(config_file);
    std::vector<Setting> overrides;
    for (const auto& entry : raw) {
      const auto eq = entry.find('=');
      if (eq == std::string::npos) throw mtaw::ConfigError("--set expects key=value, got " + entry);
      overrides.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
    }
    for (const auto& f : flags) {
      if (f.value) overrides.emplace_back(f.key, *f.value);
    }
    return mtaw::cli::resolve_config(file, overrides);
  }
};

ConfigOptions standard_options() {
  ConfigOptions o;
  o.add("--train", "train_file", "training split");
  o.add("--test", "test_file", "test split");
  o.add("--format", "format", "native | pickle | json");
  o.add("--dataset", "dataset", "preset: retailrocket | tmall");
  o.add("-o,--out", "output_dir", "directory for checkpoint, log and manifest");
  o.add("--log", "log_path", "metric log path");
  o.add("--num-items", "num_items", "catalog size (taken from the data when loaded)");
  o.add("--embed-dim", "embed_dim", "embedding size d");
  o.add("--ffn-dim", "ffn_dim", "feed-forward inner width");
  o.add("--max-len", "max_len", "keep the last max-len items of a session");
  o.add("--dropout", "dropout", "dropout rate on the feed-forward branch");
  o.add("--temperature", "temperature", "cosine score temperature");
  o.add("--gamma", "gamma", "adaptive weight exponent");
  o.add("--factor-gradient", "factor_gradient", "constant | full");
  o.add("--lr", "learning_rate", "Adam learning rate");
  o.add("--epochs", "epochs", "training epochs");
  o.add("--batch-size", "batch_size", "batch size");
  o.add("--seed", "seed", "random seed");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Multi-interest session recommender with adaptive-weight loss"};
  app.require_subcommand(1);

  ConfigOptions train_opts = standard_options();
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint, log, manifest");
  train_opts.bind(train_cmd);

  std::string ckpt_path, eval_test, eval_format = "native";
  auto* eval_cmd = app.add_subcommand("eval", "print P@10, MRR@10, P@20, MRR@20 in percent");
  eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval_cmd->add_option("--test", eval_test, "test split")->required();
  eval_cmd->add_option("--format", eval_format, "native | pickle | json");

  ConfigOptions sweep_opts = standard_options();
  std::vector<double> gammas = {2, 4, 6, 8, 10};
  auto* sweep_cmd = app.add_subcommand("sweep-gamma", "train once per gamma and print a CSV");
  sweep_opts.bind(sweep_cmd);
  sweep_cmd->add_option("--gammas", gammas, "comma-separated gamma values")->delimiter(',');

  std::string rec_ckpt;
  std::size_t rec_k = 20;
  std::vector<std::string> rec_items;
  auto* rec_cmd = app.add_subcommand("recommend", "top-k next items for a session");
  rec_cmd->add_option("--checkpoint", rec_ckpt, "checkpoint file")->required();
  rec_cmd->add_option("-k", rec_k, "number of items");
  rec_cmd->add_option("items", rec_items, "session item tokens, oldest first")->required();

  ConfigOptions timing_opts = standard_options();
  std::size_t timing_epochs = 1, timing_samples = 1000;
  auto* timing_cmd = app.add_subcommand("timing", "parameter count and seconds per epoch");
  timing_opts.bind(timing_cmd);
  timing_cmd->add_option("--timing-epochs", timing_epochs, "epochs to time (0: count only)");
  timing_cmd->add_option("--samples", timing_samples, "generated samples when no train file");

  mtaw::data::SyntheticSpec spec;
  std::size_t train_size = 5000, test_size = 1000;
  std::uint64_t synth_seed = 1;
  std::string synth_out = "synthetic";
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic rule-based dataset");
  synth_cmd->add_option("--items", spec.num_items, "catalog size");
  synth_cmd->add_option("--noise", spec.noise, "probability of a random label or step");
  synth_cmd->add_option("--min-length", spec.min_length, "shortest prefix");
  synth_cmd->add_option("--max-length", spec.max_length, "longest prefix");
  synth_cmd->add_option("--hard-fraction", spec.hard_fraction, "share of look-back sessions");
  synth_cmd->add_option("--markers", spec.num_markers, "marker items reserved for hard sessions");
  synth_cmd->add_option("--rule-seed", spec.rule_seed, "seed of the successor rules");
  synth_cmd->add_option("--train-size", train_size, "training samples");
  synth_cmd->add_option("--test-size", test_size, "test samples");
  synth_cmd->add_option("--seed", synth_seed, "sampling seed");
  synth_cmd->add_option("-o,--out", synth_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : mtaw::cli::kExitConfig;
  }

  return mtaw::cli::run_guarded(
      [&] {
        if (*train_cmd) {
          mtaw::cli::cmd_train(train_opts.resolve(), std::cout);
        } else if (*eval_cmd) {
          mtaw::cli::cmd_eval(ckpt_path, eval_test, mtaw::data::parse_format(eval_format),
                              std::cout);
        } else if (*sweep_cmd) {
          mtaw::cli::cmd_sweep_gamma(sweep_opts.resolve(), gammas, std::cout);
        } else if (*rec_cmd) {
          mtaw::cli::cmd_recommend(rec_ckpt, rec_items, rec_k, std::cout);
        } else if (*timing_cmd) {
          mtaw::cli::cmd_timing(timing_opts.resolve(), timing_epochs, timing_samples, std::cout);
        } else if (*synth_cmd) {
          mtaw::cli::cmd_synth(spec, train_size, test_size, synth_seed, synth_out, std::cout);
        }
      },
      std::cerr);
}
