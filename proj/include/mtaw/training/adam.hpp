#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mtaw/model/params.hpp"
#include "mtaw/numerics/tensor.hpp"

namespace mtaw::train {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

/// First and second moments, one pair per parameter, plus the step count.
struct OptimizerState {
  std::vector<num::Tensor> m;
  std::vector<num::Tensor> v;
  std::uint64_t step = 0;

  /// Zero moments shaped like `params`.
  static OptimizerState for_params(std::span<const num::Tensor* const> params);
  static OptimizerState for_params(const model::ModelParams& params);

  bool operator==(const OptimizerState& other) const;
};

/// One bias-corrected Adam update using each parameter's accumulated
/// gradient. A parameter without a gradient buffer is a caller bug and
/// raises std::logic_error. Gradients are left in place.
void adam_step(std::span<num::Tensor* const> params, OptimizerState& state,
               const AdamConfig& config);
void adam_step(model::ModelParams& params, OptimizerState& state, const AdamConfig& config);

}  // namespace mtaw::train
