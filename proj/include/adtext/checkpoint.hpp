#pragma once

#include <filesystem>
#include <iosfwd>

#include "adtext/corpus.hpp"
#include "adtext/encoder.hpp"
#include "adtext/tokenizer.hpp"

namespace adtext {

// Everything needed to run a trained model: config, vocabulary, label
// names, normalization setting and float32 weights.
//
// On disk:
//   ADTXT1\n
//   {json: model config, labels, normalization}\n
//   vocab <N>\n  followed by N tokens, one per line
//   then per parameter, in ModelParams::parameters() order:
//   <name>\n<dim0> <dim1> ...\n<little-endian float32 data>
struct Checkpoint {
  ModelConfig config;
  Vocabulary vocab;
  LabelMap labels;
  bool turkish_lowercase = true;
  ModelParams<float> params;

  void write(std::ostream& out) const;
  static Checkpoint read(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

inline constexpr std::string_view kCheckpointMagic = "ADTXT1";

}  // namespace adtext
