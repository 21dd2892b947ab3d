#include "mtaw/eval/metrics.hpp"

#include <fmt/format.h>

#include <stdexcept>

#include "mtaw/errors.hpp"

namespace mtaw::eval {
namespace {

void check_args(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) throw std::invalid_argument("metric over an empty rank list");
  if (k == 0) throw std::invalid_argument("metric cutoff must be at least 1");
}

}  // namespace

std::size_t rank_of_target(std::span<const double> scores, data::ItemId target) {
  if (target >= scores.size()) {
    throw DataError(fmt::format("target {} outside catalog of {}", target, scores.size()));
  }
  const double s = scores[target];
  std::size_t ahead = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > s || (scores[i] == s && i < target)) ++ahead;
  }
  return ahead + 1;
}

double precision_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  check_args(ranks, k);
  std::size_t hits = 0;
  for (std::size_t r : ranks) hits += r <= k ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double mrr_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  check_args(ranks, k);
  double total = 0.0;
  for (std::size_t r : ranks) {
    if (r <= k) total += 1.0 / static_cast<double>(r);
  }
  return total / static_cast<double>(ranks.size());
}

MetricReport summarize(std::span<const std::size_t> ranks, std::span<const std::size_t> cutoffs) {
  MetricReport report;
  report.samples = ranks.size();
  for (std::size_t k : cutoffs) {
    report.p_at[k] = precision_at_k(ranks, k);
    report.mrr_at[k] = mrr_at_k(ranks, k);
  }
  return report;
}

std::string metric_header(std::span<const std::size_t> cutoffs) {
  std::string out;
  for (std::size_t k : cutoffs) {
    if (!out.empty()) out += ',';
    out += fmt::format("P@{},MRR@{}", k, k);
  }
  return out;
}

std::string metric_fields(const MetricReport& report, std::span<const std::size_t> cutoffs) {
  std::string out;
  for (std::size_t k : cutoffs) {
    if (!out.empty()) out += ',';
    out += fmt::format("{:.17g},{:.17g}", report.p(k), report.mrr(k));
  }
  return out;
}

std::string percent_fields(const MetricReport& report, std::span<const std::size_t> cutoffs) {
  std::string out;
  for (std::size_t k : cutoffs) {
    if (!out.empty()) out += ", ";
    out += fmt::format("{:.2f}, {:.2f}", 100.0 * report.p(k), 100.0 * report.mrr(k));
  }
  return out;
}

}  // namespace mtaw::eval
