#pragma once

#include <span>

#include "mtaw/data/dataset.hpp"
#include "mtaw/numerics/graph.hpp"
#include "mtaw/numerics/tensor.hpp"

namespace mtaw::train {

/// Probabilities are clamped to at least this before taking the log.
inline constexpr double kProbFloor = 1e-12;

/// How the modulating factor (2 - 2p)^gamma enters the gradient.
enum class FactorGradient {
  /// Factor treated as a per-sample constant, as in focal-loss practice.
  kConstant,
  /// Exact derivative of the whole expression, factor included.
  kFull,
};

struct LossConfig {
  double gamma = 0.0;
  FactorGradient factor_gradient = FactorGradient::kConstant;

  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

/// (2 - 2p)^gamma, with 0^0 taken as 1.
double modulating_factor(double p, double gamma);

/// -mean_i w_i * log(clamp(scores[i, target_i])), with w held constant.
/// `scores` is a [B x N] probability node; returns a [1] node.
num::Var weighted_nll(num::Graph& g, num::Var scores, std::span<const data::ItemId> targets,
                      std::span<const double> weights);

/// Adaptive-weight loss: per sample -(2 - 2p)^gamma * log p with p the
/// probability of the target, averaged over the batch.
num::Var aw_loss(num::Graph& g, num::Var scores, std::span<const data::ItemId> targets,
                 const LossConfig& config);

/// Value-only versions over a [B x N] (or [N]) score tensor.
double aw_loss(const num::Tensor& scores, std::span<const data::ItemId> targets,
               const LossConfig& config);
double cross_entropy(const num::Tensor& scores, std::span<const data::ItemId> targets);

}  // namespace mtaw::train
