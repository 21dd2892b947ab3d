#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mtaw/data/io.hpp"
#include "mtaw/model/config.hpp"
#include "mtaw/training/loss.hpp"
#include "mtaw/training/trainer.hpp"

namespace mtaw::cli {

/// Everything a command needs: model, optimizer and loss settings plus the
/// files it reads and writes.
struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  train::LossConfig loss;

  std::string dataset;  // preset name, may be empty
  data::DatasetFormat format = data::DatasetFormat::kNative;
  std::filesystem::path train_file;
  std::filesystem::path test_file;
  std::filesystem::path output_dir = "run";
  /// Defaults to <output_dir>/metrics.csv when empty.
  std::filesystem::path log_path;

  std::filesystem::path metric_log() const {
    return log_path.empty() ? output_dir / "metrics.csv" : log_path;
  }

  /// Checks value ranges; with `need_data`, also that both data files exist.
  /// Throws ConfigError.
  void validate(bool need_data) const;

  /// Stable key=value rendering of every setting, one per line.
  std::string to_text() const;
};

using Setting = std::pair<std::string, std::string>;

/// Reads `key = value` lines; blank lines and lines starting with '#' are
/// skipped. Throws ConfigError on a malformed line or unreadable file.
std::vector<Setting> read_settings(const std::filesystem::path& path);

/// Applies one setting. Throws ConfigError on an unknown key or bad value.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Preset values for a named public dataset ("retailrocket", "tmall").
std::vector<Setting> preset_settings(std::string_view dataset);

/// Builds a config from file settings and command-line overrides. A
/// dataset preset, named in either, is applied first; then file settings;
/// then overrides, so explicit values always win over the preset.
RunConfig resolve_config(const std::vector<Setting>& file_settings,
                         const std::vector<Setting>& overrides);

}  // namespace mtaw::cli
