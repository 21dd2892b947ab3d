#include "mtaw/training/checkpoint.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "mtaw/errors.hpp"

namespace mtaw::train {
namespace {

using Kind = CheckpointError::Kind;

constexpr std::string_view kMagic = "MTAWCKPT";
constexpr std::size_t kDigestSize = 32;
constexpr std::size_t kHeaderSize = kMagic.size() + 4 + 8;

std::array<unsigned char, kDigestSize> sha256(std::string_view bytes) {
  std::array<unsigned char, kDigestSize> digest{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != kDigestSize) {
    throw CheckpointError(Kind::kIo, "SHA-256 computation failed");
  }
  return digest;
}

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    out_.append(s);
  }
  void tensor(std::string_view name, const num::Tensor& t) {
    str(name);
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) u64(d);
    for (double v : t.values()) f64(v);
  }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::pair<std::string, num::Tensor> tensor() {
    std::string name = str();
    const std::uint32_t rank = u32();
    if (rank > 8) throw CheckpointError(Kind::kCorrupt, "tensor '" + name + "' has rank > 8");
    num::Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& d : shape) {
      d = u64();
      if (d != 0 && count > (in_.size() - pos_) / d) {
        throw CheckpointError(Kind::kCorrupt, "tensor '" + name + "' is larger than the file");
      }
      count *= d;
    }
    need(count * 8);
    std::vector<double> values(count);
    for (double& v : values) v = f64();
    return {std::move(name), num::Tensor(std::move(shape), std::move(values))};
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) throw CheckpointError(Kind::kCorrupt, "checkpoint is truncated");
  }

  std::string_view in_;
  std::size_t pos_ = 0;
};

std::string config_text(const Checkpoint& c) {
  std::string s;
  auto put = [&s](std::string_view key, const auto& value) {
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(value)>>) {
      s += fmt::format("{}={:.17g}\n", key, value);
    } else {
      s += fmt::format("{}={}\n", key, value);
    }
  };
  put("model.num_items", c.model.num_items);
  put("model.embed_dim", c.model.embed_dim);
  put("model.ffn_dim", c.model.ffn_dim);
  put("model.max_len", c.model.max_len);
  put("model.dropout_rate", c.model.dropout_rate);
  put("model.score_temperature", c.model.score_temperature);
  put("model.layer_norm_eps", c.model.layer_norm_eps);
  put("loss.gamma", c.loss.gamma);
  put("loss.full_factor_gradient", c.loss.factor_gradient == FactorGradient::kFull ? 1 : 0);
  put("train.learning_rate", c.train.learning_rate);
  put("train.epochs", c.train.epochs);
  put("train.batch_size", c.train.batch_size);
  put("train.adam_beta1", c.train.adam_beta1);
  put("train.adam_beta2", c.train.adam_beta2);
  put("train.adam_eps", c.train.adam_eps);
  put("train.seed", c.train.seed);
  return s;
}

template <typename T>
T parse_number(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw CheckpointError(Kind::kCorrupt, "config block lacks '" + key + "'");
  T value{};
  const char* first = it->second.data();
  const char* last = first + it->second.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw CheckpointError(Kind::kCorrupt, "bad value for '" + key + "': " + it->second);
  }
  return value;
}

void parse_config(const std::string& text, Checkpoint& c) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError(Kind::kCorrupt, "bad config line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  c.model.num_items = parse_number<std::size_t>(kv, "model.num_items");
  c.model.embed_dim = parse_number<std::size_t>(kv, "model.embed_dim");
  c.model.ffn_dim = parse_number<std::size_t>(kv, "model.ffn_dim");
  c.model.max_len = parse_number<std::size_t>(kv, "model.max_len");
  c.model.dropout_rate = parse_number<double>(kv, "model.dropout_rate");
  c.model.score_temperature = parse_number<double>(kv, "model.score_temperature");
  c.model.layer_norm_eps = parse_number<double>(kv, "model.layer_norm_eps");
  c.loss.gamma = parse_number<double>(kv, "loss.gamma");
  c.loss.factor_gradient = parse_number<int>(kv, "loss.full_factor_gradient") != 0
                               ? FactorGradient::kFull
                               : FactorGradient::kConstant;
  c.train.learning_rate = parse_number<double>(kv, "train.learning_rate");
  c.train.epochs = parse_number<std::size_t>(kv, "train.epochs");
  c.train.batch_size = parse_number<std::size_t>(kv, "train.batch_size");
  c.train.adam_beta1 = parse_number<double>(kv, "train.adam_beta1");
  c.train.adam_beta2 = parse_number<double>(kv, "train.adam_beta2");
  c.train.adam_eps = parse_number<double>(kv, "train.adam_eps");
  c.train.seed = parse_number<std::uint64_t>(kv, "train.seed");
}

void check_against(const Checkpoint& c, const model::ModelConfig& expected) {
  const auto shapes = model::parameter_shapes(expected);
  const auto named = c.params.named();
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (named[i].second->shape() != shapes[i].second) {
      throw CheckpointError(
          Kind::kShapeMismatch,
          fmt::format("tensor '{}' is {} in the checkpoint but the configuration expects {}",
                      shapes[i].first, num::to_string(named[i].second->shape()),
                      num::to_string(shapes[i].second)));
    }
  }
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer payload;
  payload.str(config_text(ckpt));
  payload.u64(ckpt.epoch);
  payload.u64(ckpt.vocabulary.size());
  for (const auto& token : ckpt.vocabulary) payload.str(token);
  const auto named = ckpt.params.named();
  payload.u64(named.size());
  for (const auto& [name, t] : named) payload.tensor(name, *t);
  payload.u8(ckpt.optimizer ? 1 : 0);
  if (ckpt.optimizer) {
    const OptimizerState& s = *ckpt.optimizer;
    if (s.m.size() != named.size() || s.v.size() != named.size()) {
      throw CheckpointError(Kind::kShapeMismatch, "optimizer state does not match parameters");
    }
    payload.u64(s.step);
    for (std::size_t i = 0; i < named.size(); ++i) {
      payload.tensor(fmt::format("adam.m.{}", named[i].first), s.m[i]);
      payload.tensor(fmt::format("adam.v.{}", named[i].first), s.v[i]);
    }
  }

  Writer file;
  file.bytes().append(kMagic);
  file.u32(kCheckpointVersion);
  file.u64(payload.bytes().size());
  file.bytes().append(payload.bytes());
  const auto digest = sha256(payload.bytes());
  file.bytes().append(reinterpret_cast<const char*>(digest.data()), digest.size());
  return std::move(file.bytes());
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kHeaderSize + kDigestSize || bytes.substr(0, kMagic.size()) != kMagic) {
    throw CheckpointError(Kind::kCorrupt, "not a checkpoint file");
  }
  Reader header(bytes.substr(kMagic.size(), 12));
  const std::uint32_t version = header.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::kVersion, fmt::format("checkpoint version {} is not supported "
                                                      "(expected {})",
                                                      version, kCheckpointVersion));
  }
  const std::uint64_t size = header.u64();
  if (size != bytes.size() - kHeaderSize - kDigestSize) {
    throw CheckpointError(Kind::kCorrupt, "checkpoint size field disagrees with the file length");
  }
  const std::string_view payload = bytes.substr(kHeaderSize, size);
  const auto digest = sha256(payload);
  if (std::memcmp(digest.data(), bytes.data() + kHeaderSize + size, kDigestSize) != 0) {
    throw CheckpointError(Kind::kChecksum, "checkpoint checksum mismatch");
  }

  Checkpoint c;
  Reader in(payload);
  parse_config(in.str(), c);
  c.epoch = in.u64();
  const std::uint64_t vocab = in.u64();
  for (std::uint64_t i = 0; i < vocab; ++i) c.vocabulary.push_back(in.str());
  const auto named = c.params.named();
  if (in.u64() != named.size()) throw CheckpointError(Kind::kCorrupt, "unexpected tensor count");
  for (const auto& [name, t] : named) {
    auto [stored, tensor] = in.tensor();
    if (stored != name) {
      throw CheckpointError(Kind::kCorrupt, fmt::format("expected tensor '{}', found '{}'", name,
                                                        stored));
    }
    *t = std::move(tensor);
    t->set_requires_grad(true);
  }
  if (in.u8() != 0) {
    OptimizerState s;
    s.step = in.u64();
    for (std::size_t i = 0; i < named.size(); ++i) {
      s.m.push_back(in.tensor().second);
      s.v.push_back(in.tensor().second);
    }
    c.optimizer = std::move(s);
  }
  if (!in.done()) throw CheckpointError(Kind::kCorrupt, "trailing bytes in checkpoint payload");
  check_against(c, c.model);
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(Kind::kIo, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::kIo, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const model::ModelConfig& expected) {
  Checkpoint c = load_checkpoint(path);
  check_against(c, expected);
  return c;
}

}  // namespace mtaw::train
