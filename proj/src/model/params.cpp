#include "mtaw/model/params.hpp"

#include <cmath>
#include <string>

#include "mtaw/errors.hpp"

namespace mtaw::model {

void ModelConfig::validate() const {
  if (num_items < 1) throw ConfigError("num_items must be at least 1");
  if (embed_dim < 1) throw ConfigError("embed_dim must be at least 1");
  if (ffn_dim < 1) throw ConfigError("ffn_dim must be at least 1");
  if (max_len < 1) throw ConfigError("max_len must be at least 1");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must lie in [0, 1)");
  }
  if (!(score_temperature > 0.0) || !std::isfinite(score_temperature)) {
    throw ConfigError("score_temperature must be positive");
  }
  if (!(layer_norm_eps > 0.0)) throw ConfigError("layer_norm_eps must be positive");
}

std::vector<std::pair<std::string_view, num::Shape>> parameter_shapes(const ModelConfig& c) {
  const std::size_t d = c.embed_dim;
  return {
      {"item_embed", {c.num_items, d}},
      {"pos_embed", {c.max_len, d}},
      {"itl_query_weight", {d, d}},
      {"itl_query_bias", {d}},
      {"ffn_w1", {d, c.ffn_dim}},
      {"ffn_b1", {c.ffn_dim}},
      {"ffn_w2", {c.ffn_dim, d}},
      {"ffn_b2", {d}},
      {"ln_gain", {d}},
      {"ln_bias", {d}},
  };
}

std::size_t parameter_count(const ModelConfig& config) {
  std::size_t total = 0;
  for (const auto& [name, shape] : parameter_shapes(config)) total += num::element_count(shape);
  return total;
}

ModelParams ModelParams::zeros(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  const auto shapes = parameter_shapes(config);
  auto slots = p.named();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    *slots[i].second = num::Tensor(shapes[i].second);
    slots[i].second->set_requires_grad(true);
  }
  return p;
}

ModelParams ModelParams::initialize(const ModelConfig& config, num::Rng& rng) {
  ModelParams p = zeros(config);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.embed_dim));
  for (num::Tensor* w : {&p.item_embed, &p.pos_embed, &p.itl_query_weight, &p.ffn_w1, &p.ffn_w2}) {
    num::fill_uniform(*w, -bound, bound, rng);
  }
  for (double& g : p.ln_gain.values()) g = 1.0;
  return p;
}

std::vector<std::pair<std::string_view, num::Tensor*>> ModelParams::named() {
  return {{"item_embed", &item_embed}, {"pos_embed", &pos_embed},
          {"itl_query_weight", &itl_query_weight}, {"itl_query_bias", &itl_query_bias},
          {"ffn_w1", &ffn_w1}, {"ffn_b1", &ffn_b1},
          {"ffn_w2", &ffn_w2}, {"ffn_b2", &ffn_b2},
          {"ln_gain", &ln_gain}, {"ln_bias", &ln_bias}};
}

std::vector<std::pair<std::string_view, const num::Tensor*>> ModelParams::named() const {
  auto mutable_view = const_cast<ModelParams*>(this)->named();
  std::vector<std::pair<std::string_view, const num::Tensor*>> out;
  out.reserve(mutable_view.size());
  for (const auto& [name, t] : mutable_view) out.emplace_back(name, t);
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, t] : named()) total += t->size();
  return total;
}

void ModelParams::zero_grad() {
  for (auto& [name, t] : named()) t->zero_grad();
}

void ModelParams::check_shapes(const ModelConfig& config) const {
  const auto expected = parameter_shapes(config);
  const auto actual = named();
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (actual[i].second->shape() != expected[i].second) {
      throw DimensionError("parameter " + std::string(expected[i].first) + " has shape " +
                           num::to_string(actual[i].second->shape()) + ", expected " +
                           num::to_string(expected[i].second));
    }
  }
}

void ModelParams::ensure_finite() const {
  for (const auto& [name, t] : named()) t->ensure_finite("parameter " + std::string(name));
}

}  // namespace mtaw::model
