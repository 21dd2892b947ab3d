#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mtaw/cli/run_config.hpp"
#include "mtaw/data/synthetic.hpp"

namespace mtaw::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitDivergence = 4,
  kExitCheckpoint = 5,
};

/// Runs `body`, mapping library exceptions to exit codes and reporting
/// them on `err`.
int run_guarded(const std::function<void()>& body, std::ostream& err);

/// Git blob hash: SHA-1 of "blob <size>\0" followed by the file bytes.
std::string git_blob_sha1(const std::filesystem::path& path);

struct TrainArtifacts {
  std::filesystem::path checkpoint;
  std::filesystem::path metric_log;
  std::filesystem::path manifest;
};

/// Trains and writes <output_dir>/best.ckpt, the metric log and
/// <output_dir>/manifest.txt. Configuration and data are validated before
/// anything is written.
TrainArtifacts cmd_train(RunConfig config, std::ostream& out);

/// Prints "P@10, MRR@10, P@20, MRR@20" as percentages with two decimals.
/// Test tokens unknown to the checkpoint vocabulary raise DataError.
void cmd_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& test_file,
              data::DatasetFormat format, std::ostream& out);

/// One training run per gamma (plus gamma 0 when absent), sharing seed and
/// data. Writes a CSV of best-epoch metrics; a failing run is reported in
/// its row and the sweep continues.
void cmd_sweep_gamma(const RunConfig& config, std::vector<double> gammas, std::ostream& out);

/// Top-k "token, score" lines for a session given as original tokens.
void cmd_recommend(const std::filesystem::path& checkpoint,
                   const std::vector<std::string>& session, std::size_t k, std::ostream& out);

struct TimingReport {
  std::size_t parameters = 0;
  double seconds_per_epoch = 0.0;
  std::size_t samples = 0;
};

/// Counts trainable parameters and times `epochs` training epochs. Uses the
/// configured train file when set; otherwise `synthetic_samples` generated
/// sessions over the configured catalog. epochs == 0 skips timing.
TimingReport cmd_timing(const RunConfig& config, std::size_t epochs, std::size_t synthetic_samples,
                        std::ostream& out);

/// Writes train.txt and test.txt in the native format.
void cmd_synth(const data::SyntheticSpec& spec, std::size_t train_size, std::size_t test_size,
               std::uint64_t seed, const std::filesystem::path& out_dir, std::ostream& out);

}  // namespace mtaw::cli
