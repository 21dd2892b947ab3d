#include "mtaw/data/dataset.hpp"

#include <string>

#include "mtaw/errors.hpp"

namespace mtaw::data {

void Dataset::validate() const {
  if (sessions.empty()) throw DataError("dataset is empty");
  for (std::size_t s = 0; s < sessions.size(); ++s) {
    const Session& session = sessions[s];
    if (session.items.empty()) {
      throw DataError("sample " + std::to_string(s) + " has no items");
    }
    for (ItemId id : session.items) {
      if (id >= num_items) {
        throw DataError("sample " + std::to_string(s) + " references item " + std::to_string(id) +
                        " outside catalog of " + std::to_string(num_items));
      }
    }
    if (session.label >= num_items) {
      throw DataError("sample " + std::to_string(s) + " has label " +
                      std::to_string(session.label) + " outside catalog of " +
                      std::to_string(num_items));
    }
  }
}

double Dataset::average_length() const {
  if (sessions.empty()) return 0.0;
  std::size_t total = 0;
  for (const Session& s : sessions) total += s.items.size();
  return static_cast<double>(total) / static_cast<double>(sessions.size());
}

Dataset augment_prefixes(std::span<const std::vector<ItemId>> raw, std::size_t num_items,
                         std::size_t* skipped) {
  Dataset out;
  out.num_items = num_items;
  std::size_t dropped = 0;
  for (const auto& clicks : raw) {
    if (clicks.size() < 2) {
      ++dropped;
      continue;
    }
    for (std::size_t end = 1; end < clicks.size(); ++end) {
      out.sessions.push_back(
          Session{std::vector<ItemId>(clicks.begin(), clicks.begin() + end), clicks[end]});
    }
  }
  if (skipped) *skipped = dropped;
  return out;
}

void truncate(Session& session, std::size_t max_len) {
  if (max_len == 0 || session.items.size() <= max_len) return;
  session.items.erase(session.items.begin(),
                      session.items.end() - static_cast<std::ptrdiff_t>(max_len));
}

void truncate(Dataset& dataset, std::size_t max_len) {
  for (Session& s : dataset.sessions) truncate(s, max_len);
}

}  // namespace mtaw::data
