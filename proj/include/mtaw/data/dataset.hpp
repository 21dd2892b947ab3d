#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace mtaw::data {

/// Dense internal item index in [0, num_items).
using ItemId = std::size_t;

/// Padding sentinel. Lies outside every catalog, so lookups yield a zero
/// row that never receives gradient.
inline constexpr ItemId kPaddingId = std::numeric_limits<std::size_t>::max();

/// One training or test sample: a click prefix and the item that followed.
struct Session {
  std::vector<ItemId> items;
  ItemId label = 0;

  bool operator==(const Session&) const = default;
};

enum class Split { kTrain, kTest };

struct Dataset {
  std::vector<Session> sessions;
  std::size_t num_items = 0;
  Split split = Split::kTrain;

  std::size_t size() const noexcept { return sessions.size(); }
  bool empty() const noexcept { return sessions.empty(); }

  /// Throws DataError unless the dataset is nonempty, every session has at
  /// least one item, and every ID is below num_items.
  void validate() const;

  double average_length() const;
};

/// Expands each raw session [i1..im] into the m-1 samples ([i1], i2),
/// ([i1, i2], i3), ... Sessions shorter than two items are skipped and
/// counted in `skipped` when provided.
Dataset augment_prefixes(std::span<const std::vector<ItemId>> raw, std::size_t num_items,
                         std::size_t* skipped = nullptr);

/// Keeps only the most recent `max_len` items of a session. No-op for max_len == 0.
void truncate(Session& session, std::size_t max_len);
void truncate(Dataset& dataset, std::size_t max_len);

}  // namespace mtaw::data
