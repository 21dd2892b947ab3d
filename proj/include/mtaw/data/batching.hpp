#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mtaw/data/dataset.hpp"

namespace mtaw::data {

/// Sessions padded to a common width. Row b occupies
/// items[b * width, (b + 1) * width); positions at or past lengths[b] hold
/// kPaddingId and have mask 0.
struct Batch {
  std::size_t width = 0;
  std::vector<ItemId> items;
  std::vector<std::size_t> lengths;
  std::vector<std::uint8_t> mask;
  std::vector<ItemId> labels;
  std::vector<std::size_t> sample_indices;

  std::size_t size() const noexcept { return lengths.size(); }
  ItemId item(std::size_t b, std::size_t t) const { return items[b * width + t]; }
};

/// Pads the given sessions into one batch. Sessions longer than max_len
/// (when nonzero) keep their most recent items.
Batch collate(std::span<const Session> sessions, std::size_t max_len = 0);
Batch collate(const Dataset& dataset, std::span<const std::size_t> indices,
              std::size_t max_len = 0);

/// One epoch's worth of batches over a dataset. The visiting order is fixed
/// at construction; batches are assembled on access.
class BatchSequence {
 public:
  BatchSequence(const Dataset& dataset, std::size_t batch_size, std::vector<std::size_t> order,
                std::size_t max_len);

  std::size_t size() const noexcept { return count_; }
  Batch operator[](std::size_t i) const;
  const std::vector<std::size_t>& order() const noexcept { return order_; }

  class iterator {
   public:
    using value_type = Batch;
    using difference_type = std::ptrdiff_t;
    iterator(const BatchSequence* seq, std::size_t i) : seq_(seq), i_(i) {}
    Batch operator*() const { return (*seq_)[i_]; }
    iterator& operator++() {
      ++i_;
      return *this;
    }
    bool operator==(const iterator& other) const { return i_ == other.i_; }

   private:
    const BatchSequence* seq_;
    std::size_t i_;
  };
  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, count_}; }

 private:
  const Dataset* dataset_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t max_len_;
  std::size_t count_;
};

/// Covers every sample exactly once; the last batch may be partial.
/// Shuffling draws from `rng`, so a fixed seed gives a fixed order.
BatchSequence make_batches(const Dataset& dataset, std::size_t batch_size, bool shuffle,
                           std::mt19937_64& rng, std::size_t max_len = 0);

}  // namespace mtaw::data
