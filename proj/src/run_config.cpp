#include "adtext/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "adtext/errors.hpp"

namespace adtext {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(std::string_view key, std::string_view value) {
  N out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "on" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "off" || value == "0" || value == "no") return false;
  throw ConfigError("invalid boolean '" + std::string(value) + "' for " + std::string(key));
}

std::string format_real(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "train_fraction", "turkish_lowercase", "vocab_size",   "min_freq",      "hidden_size",
      "num_layers",     "num_heads",         "intermediate_size", "max_seq",   "dropout_rate",
      "epochs",         "batch_size",        "learning_rate", "adam_beta1",   "adam_beta2",
      "adam_eps",       "warmup_fraction",   "mask_rate",     "seed",         "select_metric",
      "format",
  };
  return k;
}

void RunConfig::set(std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  if (key == "train_fraction") train_fraction = parse_number<double>(key, v);
  else if (key == "turkish_lowercase") turkish_lowercase = parse_bool(key, v);
  else if (key == "vocab_size") vocab_size = parse_number<std::size_t>(key, v);
  else if (key == "min_freq") min_freq = parse_number<std::size_t>(key, v);
  else if (key == "hidden_size") model.hidden_size = parse_number<std::size_t>(key, v);
  else if (key == "num_layers") model.num_layers = parse_number<std::size_t>(key, v);
  else if (key == "num_heads") model.num_heads = parse_number<std::size_t>(key, v);
  else if (key == "intermediate_size") model.intermediate_size = parse_number<std::size_t>(key, v);
  else if (key == "max_seq") model.max_seq = parse_number<std::size_t>(key, v);
  else if (key == "dropout_rate") model.dropout_rate = parse_number<double>(key, v);
  else if (key == "epochs") train.epochs = parse_number<std::size_t>(key, v);
  else if (key == "batch_size") train.batch_size = parse_number<std::size_t>(key, v);
  else if (key == "learning_rate") train.learning_rate = parse_number<double>(key, v);
  else if (key == "adam_beta1") train.adam_beta1 = parse_number<double>(key, v);
  else if (key == "adam_beta2") train.adam_beta2 = parse_number<double>(key, v);
  else if (key == "adam_eps") train.adam_eps = parse_number<double>(key, v);
  else if (key == "warmup_fraction") train.warmup_fraction = parse_number<double>(key, v);
  else if (key == "mask_rate") train.mask_rate = parse_number<double>(key, v);
  else if (key == "seed") train.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "select_metric") train.select_metric = parse_select_metric(v);
  else if (key == "format") format = parse_report_format(v);
  else throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string RunConfig::get(std::string_view key) const {
  if (key == "train_fraction") return format_real(train_fraction);
  if (key == "turkish_lowercase") return turkish_lowercase ? "true" : "false";
  if (key == "vocab_size") return std::to_string(vocab_size);
  if (key == "min_freq") return std::to_string(min_freq);
  if (key == "hidden_size") return std::to_string(model.hidden_size);
  if (key == "num_layers") return std::to_string(model.num_layers);
  if (key == "num_heads") return std::to_string(model.num_heads);
  if (key == "intermediate_size") return std::to_string(model.intermediate_size);
  if (key == "max_seq") return std::to_string(model.max_seq);
  if (key == "dropout_rate") return format_real(model.dropout_rate);
  if (key == "epochs") return std::to_string(train.epochs);
  if (key == "batch_size") return std::to_string(train.batch_size);
  if (key == "learning_rate") return format_real(train.learning_rate);
  if (key == "adam_beta1") return format_real(train.adam_beta1);
  if (key == "adam_beta2") return format_real(train.adam_beta2);
  if (key == "adam_eps") return format_real(train.adam_eps);
  if (key == "warmup_fraction") return format_real(train.warmup_fraction);
  if (key == "mask_rate") return format_real(train.mask_rate);
  if (key == "seed") return std::to_string(train.seed);
  if (key == "select_metric") return std::string(to_string(train.select_metric));
  if (key == "format") {
    switch (format) {
      case ReportFormat::markdown:
        return "markdown";
      case ReportFormat::csv:
        return "csv";
      case ReportFormat::text:
        return "text";
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void RunConfig::parse(std::string_view text, std::string_view source) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  parse(buf.str(), path.string());
}

void RunConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (vocab_size < static_cast<std::size_t>(kNumSpecials)) throw ConfigError("vocab_size must be at least 5");
  if (min_freq < 1) throw ConfigError("min_freq must be at least 1");
  ModelConfig m = model;
  m.vocab_size = vocab_size;
  m.validate();
  train.validate();
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& k : keys()) out += k + " = " + get(k) + "\n";
  return out;
}

}  // namespace adtext
