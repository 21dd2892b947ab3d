#include "mtaw/data/io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_map>
#include <variant>

#include <json.hpp>

#include "mtaw/errors.hpp"

namespace mtaw::data {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

std::vector<std::string_view> split_tokens(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Restricted unpickler: ints, lists and tuples only, which is all the
// preprocessed two-list files contain.
class PickleReader {
 public:
  struct Value;
  using List = std::shared_ptr<std::vector<Value>>;
  struct Value {
    std::variant<std::monostate, std::int64_t, List> payload;
  };

  explicit PickleReader(std::string_view bytes) : bytes_(bytes) {}

  Value parse() {
    while (true) {
      const auto op = static_cast<std::uint8_t>(take(1)[0]);
      switch (op) {
        case 0x80: take(1); break;  // PROTO
        case 0x95: take(8); break;  // FRAME
        case '(': marks_.push_back(stack_.size()); break;
        case ']':
        case ')': push_list(); break;
        case 'N': stack_.push_back(Value{}); break;
        case 'K': stack_.push_back(int_value(read_le(1, false))); break;
        case 'M': stack_.push_back(int_value(read_le(2, false))); break;
        case 'J': stack_.push_back(int_value(read_le(4, true))); break;
        case 0x8a: {  // LONG1
          const auto n = static_cast<std::size_t>(static_cast<std::uint8_t>(take(1)[0]));
          if (n > 8) fail("integer wider than 64 bits");
          stack_.push_back(int_value(n == 0 ? 0 : read_le(n, true)));
          break;
        }
        case 'a': {  // APPEND
          Value v = pop();
          list_of(top()).push_back(std::move(v));
          break;
        }
        case 'e': {  // APPENDS
          const std::size_t mark = pop_mark();
          std::vector<Value> items(std::make_move_iterator(stack_.begin() + mark),
                                   std::make_move_iterator(stack_.end()));
          stack_.resize(mark);
          auto& dst = list_of(top());
          dst.insert(dst.end(), std::make_move_iterator(items.begin()),
                     std::make_move_iterator(items.end()));
          break;
        }
        case 'l':
        case 't': {  // LIST / TUPLE from mark
          const std::size_t mark = pop_mark();
          auto list = std::make_shared<std::vector<Value>>(
              std::make_move_iterator(stack_.begin() + mark), std::make_move_iterator(stack_.end()));
          stack_.resize(mark);
          stack_.push_back(Value{list});
          break;
        }
        case 0x85:
        case 0x86:
        case 0x87: {  // TUPLE1..3
          const std::size_t n = op - 0x84;
          if (stack_.size() < n) fail("stack underflow");
          auto list = std::make_shared<std::vector<Value>>(
              std::make_move_iterator(stack_.end() - static_cast<std::ptrdiff_t>(n)),
              std::make_move_iterator(stack_.end()));
          stack_.resize(stack_.size() - n);
          stack_.push_back(Value{list});
          break;
        }
        case 0x94: memo_[memo_.size()] = top(); break;                          // MEMOIZE
        case 'q': memo_[read_le(1, false)] = top(); break;                      // BINPUT
        case 'r': memo_[read_le(4, false)] = top(); break;                      // LONG_BINPUT
        case 'h': stack_.push_back(memo_at(read_le(1, false))); break;          // BINGET
        case 'j': stack_.push_back(memo_at(read_le(4, false))); break;          // LONG_BINGET
        case '.': return pop();                                                 // STOP
        default: {
          std::ostringstream msg;
          msg << "unsupported pickle opcode 0x" << std::hex << static_cast<int>(op);
          fail(msg.str());
        }
      }
    }
  }

  static std::vector<Value>& list_of(Value& v) {
    auto* list = std::get_if<List>(&v.payload);
    if (!list) throw DataError("pickle: expected a list");
    return **list;
  }

  static const std::vector<Value>& list_of(const Value& v) {
    auto* list = std::get_if<List>(&v.payload);
    if (!list) throw DataError("pickle: expected a list");
    return **list;
  }

  static std::int64_t int_of(const Value& v) {
    auto* i = std::get_if<std::int64_t>(&v.payload);
    if (!i) throw DataError("pickle: expected an integer");
    return *i;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("pickle: " + what + " at byte " + std::to_string(pos_));
  }

  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) fail("truncated stream");
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::int64_t read_le(std::size_t n, bool is_signed) {
    auto raw = take(n);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(raw[i])) << (8 * i);
    }
    if (is_signed && n < 8 && (v >> (8 * n - 1)) & 1U) v |= ~std::uint64_t{0} << (8 * n);
    return static_cast<std::int64_t>(v);
  }

  static Value int_value(std::int64_t v) { return Value{v}; }

  void push_list() { stack_.push_back(Value{std::make_shared<std::vector<Value>>()}); }

  Value pop() {
    if (stack_.empty()) fail("stack underflow");
    Value v = std::move(stack_.back());
    stack_.pop_back();
    return v;
  }

  Value& top() {
    if (stack_.empty()) fail("stack underflow");
    return stack_.back();
  }

  std::size_t pop_mark() {
    if (marks_.empty()) fail("missing mark");
    const std::size_t m = marks_.back();
    marks_.pop_back();
    return m;
  }

  Value memo_at(std::int64_t key) {
    auto it = memo_.find(key);
    if (it == memo_.end()) fail("memo miss");
    return it->second;
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::vector<Value> stack_;
  std::vector<std::size_t> marks_;
  std::unordered_map<std::int64_t, Value> memo_;
};

Dataset from_two_lists(const std::vector<std::vector<std::string>>& prefixes,
                       const std::vector<std::string>& labels, Vocabulary& vocab) {
  if (prefixes.size() != labels.size()) {
    throw DataError("prefix list has " + std::to_string(prefixes.size()) +
                    " entries but label list has " + std::to_string(labels.size()));
  }
  Dataset out;
  out.sessions.reserve(prefixes.size());
  for (std::size_t i = 0; i < prefixes.size(); ++i) {
    Session s;
    s.items.reserve(prefixes[i].size());
    for (const auto& tok : prefixes[i]) s.items.push_back(vocab.intern(tok));
    s.label = vocab.intern(labels[i]);
    if (s.items.empty()) throw DataError("sample " + std::to_string(i) + " has an empty prefix");
    out.sessions.push_back(std::move(s));
  }
  return out;
}

Dataset load_pickle(const std::string& bytes, Vocabulary& vocab) {
  using PR = PickleReader;
  PR reader(bytes);
  const PR::Value root = reader.parse();
  const auto& top = PR::list_of(root);
  if (top.size() < 2) throw DataError("pickle: expected (prefixes, labels)");
  std::vector<std::vector<std::string>> prefixes;
  for (const auto& seq : PR::list_of(top[0])) {
    auto& dst = prefixes.emplace_back();
    for (const auto& item : PR::list_of(seq)) dst.push_back(std::to_string(PR::int_of(item)));
  }
  std::vector<std::string> labels;
  for (const auto& item : PR::list_of(top[1])) labels.push_back(std::to_string(PR::int_of(item)));
  return from_two_lists(prefixes, labels, vocab);
}

std::string json_token(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw DataError("json: item tokens must be integers or strings");
}

Dataset load_json(const std::string& text, Vocabulary& vocab) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("json: ") + e.what());
  }
  nlohmann::json seqs, labs;
  if (doc.is_array() && doc.size() == 2) {
    seqs = doc[0];
    labs = doc[1];
  } else if (doc.is_object() && doc.contains("sequences") && doc.contains("labels")) {
    seqs = doc["sequences"];
    labs = doc["labels"];
  } else {
    throw DataError("json: expected [prefixes, labels] or {sequences, labels}");
  }
  if (!seqs.is_array() || !labs.is_array()) throw DataError("json: prefixes and labels must be arrays");
  std::vector<std::vector<std::string>> prefixes;
  for (const auto& seq : seqs) {
    if (!seq.is_array()) throw DataError("json: every prefix must be an array");
    auto& dst = prefixes.emplace_back();
    for (const auto& item : seq) dst.push_back(json_token(item));
  }
  std::vector<std::string> labels;
  for (const auto& item : labs) labels.push_back(json_token(item));
  return from_two_lists(prefixes, labels, vocab);
}

}  // namespace

DatasetFormat parse_format(std::string_view name) {
  if (name == "native") return DatasetFormat::kNative;
  if (name == "pickle") return DatasetFormat::kPickle;
  if (name == "json") return DatasetFormat::kJson;
  throw ConfigError("unknown dataset format '" + std::string(name) + "'");
}

std::string_view format_name(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::kNative: return "native";
    case DatasetFormat::kPickle: return "pickle";
    case DatasetFormat::kJson: return "json";
  }
  return "native";
}

bool parse_native_line(std::string_view line, Vocabulary& vocab, Session& out,
                       std::size_t line_no) {
  const auto first = line.find_first_not_of(" \t\r");
  if (first == std::string_view::npos || line[first] == '#') return false;
  const auto bar = line.find('|');
  if (bar == std::string_view::npos) throw DataError("missing '|' separator", line_no);
  if (line.find('|', bar + 1) != std::string_view::npos) {
    throw DataError("more than one '|' separator", line_no);
  }
  const auto items = split_tokens(line.substr(0, bar));
  const auto label = split_tokens(line.substr(bar + 1));
  if (items.empty()) throw DataError("session has no items", line_no);
  if (label.size() != 1) throw DataError("expected exactly one label token", line_no);
  out.items.clear();
  out.items.reserve(items.size());
  try {
    for (auto tok : items) out.items.push_back(vocab.intern(tok));
    out.label = vocab.intern(label[0]);
  } catch (const DataError& e) {
    throw DataError(e.what(), line_no);
  }
  return true;
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format, Vocabulary& vocab,
                     Split split, std::size_t max_len) {
  Dataset out;
  const std::string content = read_file(path);
  switch (format) {
    case DatasetFormat::kNative: {
      std::istringstream in(content);
      std::string line;
      std::size_t line_no = 0;
      Session session;
      while (std::getline(in, line)) {
        ++line_no;
        if (parse_native_line(line, vocab, session, line_no)) out.sessions.push_back(session);
      }
      break;
    }
    case DatasetFormat::kPickle: out = load_pickle(content, vocab); break;
    case DatasetFormat::kJson: out = load_json(content, vocab); break;
  }
  if (out.sessions.empty()) throw DataError("dataset " + path.string() + " has no samples");
  out.split = split;
  out.num_items = vocab.size();
  truncate(out, max_len);
  return out;
}

std::pair<Dataset, Dataset> load_splits(const std::filesystem::path& train,
                                        const std::filesystem::path& test, DatasetFormat format,
                                        Vocabulary& vocab, std::size_t max_len) {
  Dataset tr = load_dataset(train, format, vocab, Split::kTrain, max_len);
  Dataset te = load_dataset(test, format, vocab, Split::kTest, max_len);
  tr.num_items = te.num_items = vocab.size();
  return {std::move(tr), std::move(te)};
}

void save_native(const Dataset& dataset, const Vocabulary& vocab,
                 const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset file " + path.string());
  for (const Session& s : dataset.sessions) {
    for (std::size_t i = 0; i < s.items.size(); ++i) {
      out << (i ? " " : "") << vocab.original(s.items[i]);
    }
    out << " | " << vocab.original(s.label) << '\n';
  }
}

}  // namespace mtaw::data
