#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtaw/model/config.hpp"
#include "mtaw/model/params.hpp"
#include "mtaw/training/adam.hpp"
#include "mtaw/training/loss.hpp"
#include "mtaw/training/trainer.hpp"

namespace mtaw::train {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  model::ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  model::ModelParams params;
  std::optional<OptimizerState> optimizer;
  std::uint64_t epoch = 0;
  /// Original item tokens indexed by internal ID; may be empty.
  std::vector<std::string> vocabulary;
};

// File layout, all integers little-endian:
//   "MTAWCKPT" | u32 version | u64 payload size | payload | SHA-256(payload)
// The payload holds a key=value config block, the epoch, the vocabulary and
// named tensors (rank, dims, f64 values), then optional Adam moments.

std::string encode_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointError with kind kCorrupt, kChecksum or kVersion.
Checkpoint decode_checkpoint(std::string_view bytes);

/// Throws CheckpointError(kIo) when the file cannot be written.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Also requires the stored tensors to fit `expected`; a different shape
/// is reported as kShapeMismatch rather than padded or cropped.
Checkpoint load_checkpoint(const std::filesystem::path& path, const model::ModelConfig& expected);

}  // namespace mtaw::train
