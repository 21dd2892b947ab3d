#pragma once

#include <cstddef>

namespace mtaw::model {

struct ModelConfig {
  std::size_t num_items = 0;
  std::size_t embed_dim = 100;
  /// Inner width of the position-wise feed-forward block.
  std::size_t ffn_dim = 100;
  /// Sessions keep their most recent max_len items.
  std::size_t max_len = 50;
  /// Applied to the feed-forward branch before the residual add.
  double dropout_rate = 0.2;
  /// Cosine logits are divided by this before the catalog softmax.
  double score_temperature = 1.0;
  double layer_norm_eps = 1e-5;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace mtaw::model
