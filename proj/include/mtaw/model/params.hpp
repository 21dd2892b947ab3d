#pragma once

#include <cstddef>
#include <string_view>
#include <utility>
#include <vector>

#include "mtaw/model/config.hpp"
#include "mtaw/numerics/tensor.hpp"

namespace mtaw::model {

/// Every trainable tensor of the model.
struct ModelParams {
  num::Tensor item_embed;        // [N x d]
  num::Tensor pos_embed;         // [max_len x d]
  num::Tensor itl_query_weight;  // [d x d]
  num::Tensor itl_query_bias;    // [d]
  num::Tensor ffn_w1;            // [d x d_ff]
  num::Tensor ffn_b1;            // [d_ff]
  num::Tensor ffn_w2;            // [d_ff x d]
  num::Tensor ffn_b2;            // [d]
  num::Tensor ln_gain;           // [d]
  num::Tensor ln_bias;           // [d]

  /// Uniform(-1/sqrt(d), 1/sqrt(d)) weights and embeddings, zero biases,
  /// unit layer-norm gain. Marks every tensor as requiring grad.
  static ModelParams initialize(const ModelConfig& config, num::Rng& rng);
  /// All-zero weights (gain included); shapes as `initialize`.
  static ModelParams zeros(const ModelConfig& config);

  /// Stable (name, tensor) listing; checkpoint and optimizer order.
  std::vector<std::pair<std::string_view, num::Tensor*>> named();
  std::vector<std::pair<std::string_view, const num::Tensor*>> named() const;

  std::size_t parameter_count() const;
  void zero_grad();
  /// Throws DimensionError if any tensor's shape disagrees with `config`.
  void check_shapes(const ModelConfig& config) const;
  /// Throws NonFiniteError naming the first non-finite tensor.
  void ensure_finite() const;
};

/// Expected tensor shapes for a configuration, in `named()` order.
std::vector<std::pair<std::string_view, num::Shape>> parameter_shapes(const ModelConfig& config);

/// Trainable parameter count implied by a configuration.
std::size_t parameter_count(const ModelConfig& config);

}  // namespace mtaw::model
