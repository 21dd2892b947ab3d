#include "mtaw/training/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mtaw/errors.hpp"

namespace mtaw::train {
namespace {

void check_targets(const num::Tensor& scores, std::span<const data::ItemId> targets) {
  if (scores.rows() != targets.size()) {
    throw DimensionError("loss: " + std::to_string(targets.size()) + " targets for scores " +
                         num::to_string(scores.shape()));
  }
  if (targets.empty()) throw DimensionError("loss over an empty batch");
  for (data::ItemId t : targets) {
    if (t >= scores.cols()) {
      throw DataError("target " + std::to_string(t) + " outside catalog of " +
                      std::to_string(scores.cols()));
    }
  }
}

double target_prob(const num::Tensor& scores, std::size_t row, data::ItemId target) {
  return std::clamp(scores.at(row, target), kProbFloor, 1.0);
}

// d/dp of (2 - 2p)^gamma.
double factor_slope(double p, double gamma) {
  if (gamma == 0.0 || p >= 1.0) return 0.0;
  return -2.0 * gamma * std::pow(2.0 - 2.0 * p, gamma - 1.0);
}

// Shared backward: d loss / d scores[i, t_i] = coef_i / B, zero when clamped.
num::Var nll_node(num::Graph& g, num::Var scores, std::span<const data::ItemId> targets,
                  double value, std::vector<double> coef) {
  const std::vector<data::ItemId> t(targets.begin(), targets.end());
  return g.record(num::Tensor::vector({value}), {scores},
                  [scores, t, coef = std::move(coef)](num::Graph& gr, num::Var out) {
                    const double upstream = gr.grad(out)[0];
                    const num::Tensor& s = gr.value(scores);
                    auto gs = gr.grad(scores);
                    const double inv_b = 1.0 / static_cast<double>(t.size());
                    for (std::size_t i = 0; i < t.size(); ++i) {
                      const double p = s.at(i, t[i]);
                      if (p < kProbFloor || p > 1.0) continue;
                      gs[i * s.cols() + t[i]] += upstream * coef[i] * inv_b;
                    }
                  });
}

}  // namespace

void LossConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw ConfigError("gamma must be a finite value >= 0, got " + std::to_string(gamma));
  }
}

double modulating_factor(double p, double gamma) {
  if (gamma == 0.0) return 1.0;
  return std::pow(2.0 - 2.0 * p, gamma);
}

num::Var weighted_nll(num::Graph& g, num::Var scores, std::span<const data::ItemId> targets,
                      std::span<const double> weights) {
  const num::Tensor& s = g.value(scores);
  check_targets(s, targets);
  if (weights.size() != targets.size()) {
    throw DimensionError("weighted_nll: weight count differs from target count");
  }
  double total = 0.0;
  std::vector<double> coef(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double p = target_prob(s, i, targets[i]);
    total -= weights[i] * std::log(p);
    coef[i] = -weights[i] / p;
  }
  return nll_node(g, scores, targets, total / static_cast<double>(targets.size()), std::move(coef));
}

num::Var aw_loss(num::Graph& g, num::Var scores, std::span<const data::ItemId> targets,
                 const LossConfig& config) {
  config.validate();
  const num::Tensor& s = g.value(scores);
  check_targets(s, targets);
  std::vector<double> weights(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    weights[i] = modulating_factor(target_prob(s, i, targets[i]), config.gamma);
  }
  if (config.factor_gradient == FactorGradient::kConstant) {
    return weighted_nll(g, scores, targets, weights);
  }
  double total = 0.0;
  std::vector<double> coef(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double p = target_prob(s, i, targets[i]);
    const double log_p = std::log(p);
    total -= weights[i] * log_p;
    const double slope = factor_slope(p, config.gamma);
    coef[i] = -((slope == 0.0 ? 0.0 : slope * log_p) + weights[i] / p);
  }
  return nll_node(g, scores, targets, total / static_cast<double>(targets.size()), std::move(coef));
}

double aw_loss(const num::Tensor& scores, std::span<const data::ItemId> targets,
               const LossConfig& config) {
  config.validate();
  check_targets(scores, targets);
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double p = target_prob(scores, i, targets[i]);
    total -= modulating_factor(p, config.gamma) * std::log(p);
  }
  return total / static_cast<double>(targets.size());
}

double cross_entropy(const num::Tensor& scores, std::span<const data::ItemId> targets) {
  check_targets(scores, targets);
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    total -= std::log(target_prob(scores, i, targets[i]));
  }
  return total / static_cast<double>(targets.size());
}

}  // namespace mtaw::train
