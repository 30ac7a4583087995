#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace adtext {

// One ad text as it appears in the source file.
struct RawRecord {
  std::string id;
  std::string category_name;
  std::string text;

  bool operator==(const RawRecord&) const = default;
};

struct LabeledExample {
  std::string id;
  std::string text;
  int label = 0;

  bool operator==(const LabeledExample&) const = default;
};

// Dense, sorted mapping between category names and class ids.
class LabelMap {
 public:
  LabelMap() = default;
  // Duplicates are collapsed; ids follow the sorted order of names.
  explicit LabelMap(std::vector<std::string> names);
  static LabelMap from_records(std::span<const RawRecord> records);

  int index(std::string_view name) const;  // throws InputError for unknown names
  bool contains(std::string_view name) const;
  const std::string& name(int id) const { return names_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& names() const { return names_; }
  int size() const { return static_cast<int>(names_.size()); }

  bool operator==(const LabelMap& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::map<std::string, int, std::less<>> index_;
};

struct DatasetSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> test;
  std::uint64_t seed = 0;
  double train_fraction = 0.7;
};

enum class CorpusFormat { jsonl, csv };

// Picks the format from the file extension (".csv" -> csv, anything else -> jsonl).
CorpusFormat format_for_path(const std::filesystem::path& path);

std::vector<RawRecord> load_corpus(const std::filesystem::path& path, CorpusFormat format);
std::vector<RawRecord> parse_jsonl(std::string_view content);
std::vector<RawRecord> parse_csv(std::string_view content);

// Splits one RFC-4180 document into records of fields. Quoted fields may
// contain separators, doubled quotes, and line breaks. `start_lines` receives
// the 1-based line number where each record begins.
std::vector<std::vector<std::string>> split_csv(std::string_view content,
                                                std::vector<std::size_t>* start_lines = nullptr);
std::string csv_escape(std::string_view field);

// Lowercases, replaces every punctuation (P*) and symbol (S*) codepoint with a
// space, collapses whitespace runs and trims. Turkish casing maps I -> ı and
// İ -> i; otherwise root-locale Unicode lowercasing is used.
std::string normalize(std::string_view text, bool turkish_lowercase = true);

// Keeps the first record for each (text, category) pair. Expects normalized text.
std::vector<RawRecord> dedup(std::span<const RawRecord> records);

// normalize() every record, drop records whose text becomes empty, then dedup().
std::vector<RawRecord> preprocess(std::span<const RawRecord> records, bool turkish_lowercase);

std::vector<LabeledExample> label_examples(std::span<const RawRecord> records, const LabelMap& labels);

// Per class: seeded shuffle, then the first round-half-up(fraction * N_c)
// go to train. Both sides keep the input order.
DatasetSplit stratified_split(std::span<const LabeledExample> examples, double train_fraction,
                              std::uint64_t seed, std::span<const std::string> class_names = {});

std::size_t word_count(std::string_view normalized_text);

}  // namespace adtext
