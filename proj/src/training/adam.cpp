#include "mtaw/training/adam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "mtaw/errors.hpp"

namespace mtaw::train {
namespace {

std::vector<num::Tensor*> pointers(model::ModelParams& params) {
  std::vector<num::Tensor*> out;
  for (auto& [name, t] : params.named()) out.push_back(t);
  return out;
}

bool same_values(const num::Tensor& a, const num::Tensor& b) {
  return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(),
                                              b.values().begin(), b.values().end());
}

}  // namespace

void AdamConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be finite and >= 0");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in (0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("Adam eps must be positive");
}

OptimizerState OptimizerState::for_params(std::span<const num::Tensor* const> params) {
  OptimizerState s;
  for (const num::Tensor* p : params) {
    s.m.emplace_back(p->shape());
    s.v.emplace_back(p->shape());
  }
  return s;
}

OptimizerState OptimizerState::for_params(const model::ModelParams& params) {
  std::vector<const num::Tensor*> ptrs;
  for (const auto& [name, t] : params.named()) ptrs.push_back(t);
  return for_params(ptrs);
}

bool OptimizerState::operator==(const OptimizerState& other) const {
  if (step != other.step || m.size() != other.m.size() || v.size() != other.v.size()) return false;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!same_values(m[i], other.m[i]) || !same_values(v[i], other.v[i])) return false;
  }
  return true;
}

void adam_step(std::span<num::Tensor* const> params, OptimizerState& state,
               const AdamConfig& config) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::logic_error("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                           " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->has_grad()) {
      throw std::logic_error("adam_step: parameter " + std::to_string(i) + " has no gradient");
    }
    if (state.m[i].shape() != params[i]->shape()) {
      throw std::logic_error("adam_step: moment shape " + num::to_string(state.m[i].shape()) +
                             " differs from parameter " + num::to_string(params[i]->shape()));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(config.beta1, t);
  const double correct2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    num::Tensor& p = *params[i];
    const auto grad = std::as_const(p).grad();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = grad[j];
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g;
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[j] / correct1;
      const double v_hat = v[j] / correct2;
      p[j] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

void adam_step(model::ModelParams& params, OptimizerState& state, const AdamConfig& config) {
  const auto ptrs = pointers(params);
  adam_step(std::span<num::Tensor* const>(ptrs), state, config);
}

}  // namespace mtaw::train
