#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace adtext {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kClsId = 2;
inline constexpr int kSepId = 3;
inline constexpr int kMaskId = 4;
inline constexpr int kNumSpecials = 5;
inline constexpr std::string_view kContinuationPrefix = "##";
// Words longer than this (in codepoints) encode as a single [UNK].
inline constexpr std::size_t kMaxWordChars = 100;

// WordPiece token table. Specials occupy ids 0..4.
class Vocabulary {
 public:
  Vocabulary();  // specials only
  // Validates that the first five tokens are the specials and that tokens are unique.
  explicit Vocabulary(std::vector<std::string> tokens);

  static Vocabulary load(const std::filesystem::path& path);
  static Vocabulary read(std::istream& in, std::size_t count);
  void save(const std::filesystem::path& path) const;
  void write(std::ostream& out) const;

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;  // throws InputError for out-of-range ids
  int id_of(std::string_view token) const;  // -1 when absent
  bool contains(std::string_view token) const { return id_of(token) >= 0; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  static bool is_special(int id) { return id >= 0 && id < kNumSpecials; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

const std::vector<std::string>& special_tokens();

// Fixed-length model input: [CLS] pieces... [SEP] [PAD]...
struct Encoding {
  std::vector<int> ids;
  std::vector<int> attention_mask;
  std::size_t true_length = 0;

  bool operator==(const Encoding&) const = default;
};

// Splits a UTF-8 string into its codepoints, each as its own UTF-8 substring.
std::vector<std::string_view> utf8_chars(std::string_view s);
std::vector<std::string_view> split_words(std::string_view text);

// Specials, then both surface forms ("x" and "##x") of every character seen
// at least min_freq times, then merged units in order of descending pair
// frequency (ties: lexicographically smallest pair) until vocab_size is reached.
Vocabulary build_vocab(std::span<const std::string> texts, std::size_t vocab_size,
                       std::size_t min_freq = 1);

// Greedy longest-match-first split of one word. Returns {kUnkId} when the
// word cannot be covered.
std::vector<int> wordpiece(std::string_view word, const Vocabulary& vocab);
std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab);

Encoding encode(std::string_view text, const Vocabulary& vocab, std::size_t max_seq);
std::string decode(std::span<const int> ids, const Vocabulary& vocab);

}  // namespace adtext
