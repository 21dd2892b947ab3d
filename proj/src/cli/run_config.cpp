#include "mtaw/cli/run_config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include "mtaw/errors.hpp"

namespace mtaw::cli {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(fmt::format("invalid value '{}' for '{}'", value, key));
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;

template <typename T, typename Field>
Setter number(Field field) {
  return [field](RunConfig& c, std::string_view k, std::string_view v) {
    field(c) = parse<T>(k, v);
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"num_items", number<std::size_t>([](RunConfig& c) -> auto& { return c.model.num_items; })},
      {"embed_dim", number<std::size_t>([](RunConfig& c) -> auto& { return c.model.embed_dim; })},
      {"ffn_dim", number<std::size_t>([](RunConfig& c) -> auto& { return c.model.ffn_dim; })},
      {"max_len", number<std::size_t>([](RunConfig& c) -> auto& { return c.model.max_len; })},
      {"dropout", number<double>([](RunConfig& c) -> auto& { return c.model.dropout_rate; })},
      {"temperature",
       number<double>([](RunConfig& c) -> auto& { return c.model.score_temperature; })},
      {"gamma", number<double>([](RunConfig& c) -> auto& { return c.loss.gamma; })},
      {"factor_gradient",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         const std::string mode = lower(v);
         if (mode == "constant") {
           c.loss.factor_gradient = train::FactorGradient::kConstant;
         } else if (mode == "full") {
           c.loss.factor_gradient = train::FactorGradient::kFull;
         } else {
           throw ConfigError(fmt::format("'{}' must be 'constant' or 'full', got '{}'", k, v));
         }
       }},
      {"learning_rate",
       number<double>([](RunConfig& c) -> auto& { return c.train.learning_rate; })},
      {"epochs", number<std::size_t>([](RunConfig& c) -> auto& { return c.train.epochs; })},
      {"batch_size", number<std::size_t>([](RunConfig& c) -> auto& { return c.train.batch_size; })},
      {"adam_beta1", number<double>([](RunConfig& c) -> auto& { return c.train.adam_beta1; })},
      {"adam_beta2", number<double>([](RunConfig& c) -> auto& { return c.train.adam_beta2; })},
      {"adam_eps", number<double>([](RunConfig& c) -> auto& { return c.train.adam_eps; })},
      {"seed", number<std::uint64_t>([](RunConfig& c) -> auto& { return c.train.seed; })},
      {"dataset", [](RunConfig& c, std::string_view, std::string_view v) { c.dataset = lower(v); }},
      {"format",
       [](RunConfig& c, std::string_view, std::string_view v) { c.format = data::parse_format(v); }},
      {"train_file", [](RunConfig& c, std::string_view, std::string_view v) { c.train_file = v; }},
      {"test_file", [](RunConfig& c, std::string_view, std::string_view v) { c.test_file = v; }},
      {"output_dir", [](RunConfig& c, std::string_view, std::string_view v) { c.output_dir = v; }},
      {"log_path", [](RunConfig& c, std::string_view, std::string_view v) { c.log_path = v; }},
  };
  return table;
}

std::string find_dataset(const std::vector<Setting>& a, const std::vector<Setting>& b) {
  std::string name;
  for (const auto* list : {&a, &b}) {
    for (const auto& [k, v] : *list) {
      if (k == "dataset") name = v;
    }
  }
  return name;
}

}  // namespace

void RunConfig::validate(bool need_data) const {
  // With data, the catalog size comes from the vocabulary after loading.
  model::ModelConfig m = model;
  if (need_data && m.num_items == 0) m.num_items = 1;
  m.validate();
  train.validate();
  loss.validate();
  if (!dataset.empty()) preset_settings(dataset);
  if (!need_data) return;
  for (const auto& [what, path] : {std::pair{"train_file", &train_file}, {"test_file", &test_file}}) {
    if (path->empty()) throw ConfigError(fmt::format("'{}' is required", what));
    if (!std::filesystem::is_regular_file(*path)) {
      throw ConfigError(fmt::format("{} '{}' does not exist", what, path->string()));
    }
  }
}

std::string RunConfig::to_text() const {
  std::string s;
  auto put = [&s](std::string_view k, const auto& v) { s += fmt::format("{}={}\n", k, v); };
  put("dataset", dataset);
  put("format", data::format_name(format));
  put("train_file", train_file.string());
  put("test_file", test_file.string());
  put("output_dir", output_dir.string());
  put("log_path", metric_log().string());
  put("num_items", model.num_items);
  put("embed_dim", model.embed_dim);
  put("ffn_dim", model.ffn_dim);
  put("max_len", model.max_len);
  put("dropout", model.dropout_rate);
  put("temperature", model.score_temperature);
  put("gamma", loss.gamma);
  put("factor_gradient",
      loss.factor_gradient == train::FactorGradient::kFull ? "full" : "constant");
  put("learning_rate", train.learning_rate);
  put("epochs", train.epochs);
  put("batch_size", train.batch_size);
  put("adam_beta1", train.adam_beta1);
  put("adam_beta2", train.adam_beta2);
  put("adam_eps", train.adam_eps);
  put("seed", train.seed);
  return s;
}

std::vector<Setting> read_settings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::vector<Setting> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("{}:{}: expected key = value", path.string(), line_no));
    }
    out.emplace_back(std::string(trim(body.substr(0, eq))), std::string(trim(body.substr(eq + 1))));
  }
  return out;
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError(fmt::format("unknown setting '{}'", key));
  it->second(config, key, trim(value));
}

std::vector<Setting> preset_settings(std::string_view dataset) {
  const std::string name = lower(dataset);
  if (name == "retailrocket") return {{"gamma", "6"}, {"num_items", "36968"}};
  if (name == "tmall") return {{"gamma", "2"}, {"num_items", "40728"}};
  throw ConfigError(fmt::format("unknown dataset preset '{}' (known: retailrocket, tmall)", dataset));
}

RunConfig resolve_config(const std::vector<Setting>& file_settings,
                         const std::vector<Setting>& overrides) {
  RunConfig config;
  const std::string dataset = find_dataset(file_settings, overrides);
  if (!dataset.empty()) {
    for (const auto& [k, v] : preset_settings(dataset)) apply_setting(config, k, v);
  }
  for (const auto* list : {&file_settings, &overrides}) {
    for (const auto& [k, v] : *list) apply_setting(config, k, v);
  }
  return config;
}

}  // namespace mtaw::cli
