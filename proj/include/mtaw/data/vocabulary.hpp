#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mtaw/data/dataset.hpp"

namespace mtaw::data {

/// Bijection between original item tokens and dense internal IDs, assigned
/// in first-seen order. A frozen vocabulary rejects unseen tokens.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> originals);

  /// Internal ID for `token`, assigning the next free ID if unseen.
  /// Throws DataError on an unseen token when frozen.
  ItemId intern(std::string_view token);
  std::optional<ItemId> find(std::string_view token) const;
  const std::string& original(ItemId id) const;

  std::size_t size() const noexcept { return originals_.size(); }
  const std::vector<std::string>& originals() const noexcept { return originals_; }

  void freeze() noexcept { frozen_ = true; }
  bool frozen() const noexcept { return frozen_; }

  /// Two columns per line: original token, internal ID.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> originals_;
  std::unordered_map<std::string, ItemId> index_;
  bool frozen_ = false;
};

}  // namespace mtaw::data
