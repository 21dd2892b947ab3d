#include "mtaw/data/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "mtaw/errors.hpp"

namespace mtaw::data {

void SyntheticSpec::validate() const {
  if (num_items < 2) throw ConfigError("synthetic catalog needs at least 2 items");
  if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("synthetic noise must lie in [0, 1]");
  if (min_length < 1 || max_length < min_length) {
    throw ConfigError("synthetic lengths need 1 <= min_length <= max_length");
  }
  if (!(hard_fraction >= 0.0 && hard_fraction <= 1.0)) {
    throw ConfigError("hard_fraction must lie in [0, 1]");
  }
  if (hard_fraction > 0.0 && (num_markers == 0 || max_length < 2)) {
    throw ConfigError("hard sessions need at least one marker item and max_length >= 2");
  }
  if (num_markers + 2 > num_items) throw ConfigError("too many marker items for the catalog");
}

SuccessorRule SuccessorRule::from_spec(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.rule_seed);
  SuccessorRule rule;
  rule.next.resize(spec.regular_items());
  std::iota(rule.next.begin(), rule.next.end(), ItemId{0});
  std::shuffle(rule.next.begin(), rule.next.end(), rng);
  rule.hard_next = rule.next;
  std::shuffle(rule.hard_next.begin(), rule.hard_next.end(), rng);
  return rule;
}

Dataset generate_synthetic(const SyntheticSpec& spec, std::size_t n_sessions,
                           std::mt19937_64& rng, Split split) {
  const SuccessorRule rule = SuccessorRule::from_spec(spec);
  const std::size_t regular = spec.regular_items();
  std::uniform_int_distribution<ItemId> any_regular(0, regular - 1);
  std::uniform_int_distribution<ItemId> any_item(0, spec.num_items - 1);
  std::uniform_int_distribution<ItemId> any_marker(regular, spec.num_items - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto noisy = [&] { return spec.noise > 0.0 && unit(rng) < spec.noise; };

  Dataset out;
  out.num_items = spec.num_items;
  out.split = split;
  out.sessions.reserve(n_sessions);
  for (std::size_t s = 0; s < n_sessions; ++s) {
    const bool hard = spec.hard_fraction > 0.0 && unit(rng) < spec.hard_fraction;
    std::size_t min_len = hard ? std::max<std::size_t>(spec.min_length, 2) : spec.min_length;
    std::uniform_int_distribution<std::size_t> length(min_len, spec.max_length);
    const std::size_t len = length(rng);
    const std::size_t walk = hard ? len - 1 : len;

    Session session;
    session.items.reserve(len);
    session.items.push_back(any_regular(rng));
    while (session.items.size() < walk) {
      const ItemId prev = session.items.back();
      session.items.push_back(noisy() ? any_regular(rng) : rule.next[prev]);
    }
    const ItemId anchor = session.items.back();
    if (hard) session.items.push_back(any_marker(rng));
    const ItemId truth = hard ? rule.hard_next[anchor] : rule.next[anchor];
    session.label = noisy() ? any_item(rng) : truth;
    out.sessions.push_back(std::move(session));
  }
  return out;
}

double bayes_optimal_p_at_1(const SyntheticSpec& spec) {
  return (1.0 - spec.noise) + spec.noise / static_cast<double>(spec.num_items);
}

Vocabulary synthetic_vocabulary(std::size_t num_items) {
  std::vector<std::string> tokens(num_items);
  for (std::size_t i = 0; i < num_items; ++i) tokens[i] = std::to_string(i);
  return Vocabulary(std::move(tokens));
}

}  // namespace mtaw::data
