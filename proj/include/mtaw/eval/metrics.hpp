#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mtaw/data/dataset.hpp"

namespace mtaw::eval {

/// 1-based position of `target` when items are sorted by descending score,
/// ties going to the smaller item ID.
std::size_t rank_of_target(std::span<const double> scores, data::ItemId target);

/// Fraction of ranks <= k. Throws std::invalid_argument on an empty list or k == 0.
double precision_at_k(std::span<const std::size_t> ranks, std::size_t k);
/// Mean of 1/rank over ranks <= k, counting the rest as 0.
double mrr_at_k(std::span<const std::size_t> ranks, std::size_t k);

inline const std::vector<std::size_t> kDefaultCutoffs = {10, 20};

struct MetricReport {
  std::map<std::size_t, double> p_at;
  std::map<std::size_t, double> mrr_at;
  std::size_t samples = 0;

  /// Throws std::out_of_range for a cutoff that was not computed.
  double p(std::size_t k) const { return p_at.at(k); }
  double mrr(std::size_t k) const { return mrr_at.at(k); }

  bool operator==(const MetricReport&) const = default;
};

MetricReport summarize(std::span<const std::size_t> ranks,
                       std::span<const std::size_t> cutoffs = kDefaultCutoffs);

/// "P@10,MRR@10,P@20,MRR@20" for the given cutoffs.
std::string metric_header(std::span<const std::size_t> cutoffs = kDefaultCutoffs);
/// Fractions in header order, full precision.
std::string metric_fields(const MetricReport& report,
                          std::span<const std::size_t> cutoffs = kDefaultCutoffs);
/// Percentages with two decimals in header order, e.g. "56.39, 33.10, ...".
std::string percent_fields(const MetricReport& report,
                           std::span<const std::size_t> cutoffs = kDefaultCutoffs);

}  // namespace mtaw::eval
