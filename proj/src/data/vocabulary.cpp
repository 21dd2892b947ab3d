#include "mtaw/data/vocabulary.hpp"

#include <fstream>
#include <sstream>

#include "mtaw/errors.hpp"

namespace mtaw::data {

Vocabulary::Vocabulary(std::vector<std::string> originals) : originals_(std::move(originals)) {
  for (ItemId id = 0; id < originals_.size(); ++id) {
    if (!index_.emplace(originals_[id], id).second) {
      throw DataError("duplicate vocabulary token '" + originals_[id] + "'");
    }
  }
}

ItemId Vocabulary::intern(std::string_view token) {
  if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
  if (frozen_) throw DataError("unknown item token '" + std::string(token) + "'");
  const ItemId id = originals_.size();
  originals_.emplace_back(token);
  index_.emplace(originals_.back(), id);
  return id;
}

std::optional<ItemId> Vocabulary::find(std::string_view token) const {
  if (auto it = index_.find(std::string(token)); it != index_.end()) return it->second;
  return std::nullopt;
}

const std::string& Vocabulary::original(ItemId id) const {
  if (id >= originals_.size()) {
    throw DataError("internal item " + std::to_string(id) + " outside vocabulary");
  }
  return originals_[id];
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary file " + path.string());
  for (ItemId id = 0; id < originals_.size(); ++id) out << originals_[id] << ' ' << id << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file " + path.string());
  std::vector<std::string> originals;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    ItemId id = 0;
    if (!(fields >> token >> id)) throw DataError("malformed vocabulary row", line_no);
    if (id != originals.size()) throw DataError("vocabulary IDs must be dense and ordered", line_no);
    originals.push_back(token);
  }
  return Vocabulary(std::move(originals));
}

}  // namespace mtaw::data
