#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "mtaw/data/dataset.hpp"
#include "mtaw/data/vocabulary.hpp"

namespace mtaw::data {

/// Rule-based session generator with a known achievable accuracy.
///
/// Regular items occupy [0, num_items - num_markers); the remaining IDs are
/// marker items. An easy session is a walk along a fixed successor
/// permutation and its label is successor(last item). A hard session (drawn
/// with probability hard_fraction) ends in a marker, and its label is
/// hard_successor(item before the marker), so the model must look one step
/// back. With probability `noise` a label is replaced by a uniform draw over
/// the whole catalog; walk steps are perturbed the same way over regular items.
struct SyntheticSpec {
  std::size_t num_items = 20;
  double noise = 0.0;
  std::size_t min_length = 1;
  std::size_t max_length = 8;
  double hard_fraction = 0.0;
  std::size_t num_markers = 0;
  /// Seeds the successor permutations; train and test splits share it.
  std::uint64_t rule_seed = 1;

  void validate() const;
  std::size_t regular_items() const noexcept { return num_items - num_markers; }
};

struct SuccessorRule {
  std::vector<ItemId> next;
  std::vector<ItemId> hard_next;

  static SuccessorRule from_spec(const SyntheticSpec& spec);
};

Dataset generate_synthetic(const SyntheticSpec& spec, std::size_t n_sessions,
                           std::mt19937_64& rng, Split split = Split::kTrain);

/// Best achievable P@1 on data from `spec`: (1 - noise) + noise / N.
double bayes_optimal_p_at_1(const SyntheticSpec& spec);

/// Identity vocabulary "0" .. "N-1" for synthetic catalogs.
Vocabulary synthetic_vocabulary(std::size_t num_items);

}  // namespace mtaw::data
