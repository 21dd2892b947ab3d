#pragma once

#include <cstddef>
#include <filesystem>
#include <string_view>
#include <utility>

#include "mtaw/data/dataset.hpp"
#include "mtaw/data/vocabulary.hpp"

namespace mtaw::data {

enum class DatasetFormat {
  /// One sample per line: whitespace-separated item tokens, `|`, label token.
  kNative,
  /// Pickled 2-tuple (list of prefix lists, list of labels), as distributed
  /// with the public preprocessed Tmall / RetailRocket splits. Samples are
  /// taken as already prefix-augmented.
  kPickle,
  /// JSON two-list form: [[prefixes...], [labels...]] or
  /// {"sequences": [...], "labels": [...]}.
  kJson,
};

DatasetFormat parse_format(std::string_view name);
std::string_view format_name(DatasetFormat format);

/// Parses one native-format line. Returns false for blank or comment lines.
bool parse_native_line(std::string_view line, Vocabulary& vocab, Session& out,
                       std::size_t line_no);

/// Loads a split, interning tokens through `vocab`. `num_items` of the
/// result equals vocab.size() after loading; sessions longer than max_len
/// (when nonzero) keep their most recent items.
Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format, Vocabulary& vocab,
                     Split split, std::size_t max_len = 0);

/// Loads train then test through one vocabulary; both report the final
/// catalog size.
std::pair<Dataset, Dataset> load_splits(const std::filesystem::path& train,
                                        const std::filesystem::path& test, DatasetFormat format,
                                        Vocabulary& vocab, std::size_t max_len = 0);

/// Writes a dataset in the native format using original tokens.
void save_native(const Dataset& dataset, const Vocabulary& vocab,
                 const std::filesystem::path& path);

}  // namespace mtaw::data
