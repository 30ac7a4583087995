#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adtext/corpus.hpp"

namespace adtext {

// The twelve sector names used for generated data.
const std::vector<std::string>& synthetic_categories();

struct SyntheticOptions {
  std::size_t texts_per_class = 200;
  std::uint64_t seed = 7;
  std::size_t min_keywords = 1;
  std::size_t max_keywords = 2;
  std::size_t min_fillers = 2;
  std::size_t max_fillers = 5;
};

// Ad-like texts: each mixes class-specific keywords with filler words shared
// by all classes, in title case with some punctuation. Texts are unique after
// normalization, so preprocessing keeps every one of them.
std::vector<RawRecord> synthetic_ad_corpus(const SyntheticOptions& options = {});

// A small set of fixed sentences, each repeated `repeats` times.
std::vector<std::string> repetitive_corpus(std::size_t repeats);

std::string to_jsonl(std::span<const RawRecord> records);

}  // namespace adtext
