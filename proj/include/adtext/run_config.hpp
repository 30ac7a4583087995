#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "adtext/encoder.hpp"
#include "adtext/metrics.hpp"
#include "adtext/train.hpp"

namespace adtext {

// Every setting a CLI run can use. Sources, in increasing precedence:
// built-in defaults, a `key = value` config file, command-line flags.
struct RunConfig {
  double train_fraction = 0.7;
  bool turkish_lowercase = true;
  std::size_t vocab_size = 4000;
  std::size_t min_freq = 1;
  ModelConfig model;
  TrainConfig train;
  ReportFormat format = ReportFormat::text;

  // Throws ConfigError for unknown keys and unparsable values.
  void set(std::string_view key, std::string_view value);
  // Lines of `key = value`; `#` starts a comment; blank lines are ignored.
  void load_file(const std::filesystem::path& path);
  void parse(std::string_view text, std::string_view source = "<config>");
  void validate() const;

  std::string get(std::string_view key) const;
  // All keys as `key = value`, one per line, in keys() order.
  std::string to_text() const;
  static const std::vector<std::string>& keys();
};

}  // namespace adtext
