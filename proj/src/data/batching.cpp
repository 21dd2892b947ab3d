#include "mtaw/data/batching.hpp"

#include <algorithm>
#include <numeric>

#include "mtaw/errors.hpp"

namespace mtaw::data {
namespace {

template <typename Get>
Batch assemble(std::size_t count, Get&& get, std::size_t max_len) {
  Batch batch;
  batch.lengths.resize(count);
  batch.labels.resize(count);
  for (std::size_t b = 0; b < count; ++b) {
    const Session& s = get(b);
    const std::size_t len = max_len ? std::min(s.items.size(), max_len) : s.items.size();
    if (len == 0) throw DataError("cannot batch an empty session");
    batch.lengths[b] = len;
    batch.labels[b] = s.label;
    batch.width = std::max(batch.width, len);
  }
  batch.items.assign(count * batch.width, kPaddingId);
  batch.mask.assign(count * batch.width, 0);
  for (std::size_t b = 0; b < count; ++b) {
    const Session& s = get(b);
    const std::size_t len = batch.lengths[b];
    const std::size_t skip = s.items.size() - len;
    for (std::size_t t = 0; t < len; ++t) {
      batch.items[b * batch.width + t] = s.items[skip + t];
      batch.mask[b * batch.width + t] = 1;
    }
  }
  return batch;
}

}  // namespace

Batch collate(std::span<const Session> sessions, std::size_t max_len) {
  Batch batch = assemble(sessions.size(), [&](std::size_t b) -> const Session& { return sessions[b]; },
                         max_len);
  batch.sample_indices.resize(sessions.size());
  std::iota(batch.sample_indices.begin(), batch.sample_indices.end(), std::size_t{0});
  return batch;
}

Batch collate(const Dataset& dataset, std::span<const std::size_t> indices, std::size_t max_len) {
  Batch batch = assemble(
      indices.size(), [&](std::size_t b) -> const Session& { return dataset.sessions.at(indices[b]); },
      max_len);
  batch.sample_indices.assign(indices.begin(), indices.end());
  return batch;
}

BatchSequence::BatchSequence(const Dataset& dataset, std::size_t batch_size,
                             std::vector<std::size_t> order, std::size_t max_len)
    : dataset_(&dataset),
      batch_size_(batch_size),
      order_(std::move(order)),
      max_len_(max_len),
      count_(batch_size == 0 ? 0 : (order_.size() + batch_size - 1) / batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
}

Batch BatchSequence::operator[](std::size_t i) const {
  const std::size_t begin = i * batch_size_;
  const std::size_t end = std::min(order_.size(), begin + batch_size_);
  return collate(*dataset_, std::span(order_).subspan(begin, end - begin), max_len_);
}

BatchSequence make_batches(const Dataset& dataset, std::size_t batch_size, bool shuffle,
                           std::mt19937_64& rng, std::size_t max_len) {
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) std::shuffle(order.begin(), order.end(), rng);
  return BatchSequence(dataset, batch_size, std::move(order), max_len);
}

}  // namespace mtaw::data
