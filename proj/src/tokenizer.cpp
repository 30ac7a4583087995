#include "adtext/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <unordered_map>

#include "adtext/errors.hpp"

namespace adtext {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
  return specials;
}

Vocabulary::Vocabulary() : Vocabulary(special_tokens()) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  const auto& specials = special_tokens();
  if (tokens_.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), tokens_.begin())) {
    throw InputError("vocabulary must start with [PAD] [UNK] [CLS] [SEP] [MASK]");
  }
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw InputError("empty token at vocabulary id " + std::to_string(i));
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw InputError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw InputError("invalid token id " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::id_of(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? -1 : it->second;
}

Vocabulary Vocabulary::read(std::istream& in, std::size_t count) {
  std::vector<std::string> tokens;
  tokens.reserve(count);
  std::string line;
  while (tokens.size() < count && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  if (tokens.size() != count) {
    throw InputError("vocabulary truncated: expected " + std::to_string(count) + " tokens, got " +
                     std::to_string(tokens.size()));
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open vocabulary file: " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  return Vocabulary(std::move(tokens));
}

void Vocabulary::write(std::ostream& out) const {
  for (const auto& t : tokens_) out << t << '\n';
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write vocabulary file: " + path.string());
  write(out);
}

std::vector<std::string_view> utf8_chars(std::string_view s) {
  std::vector<std::string_view> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (lead >= 0xF0) {
      len = 4;
    } else if (lead >= 0xE0) {
      len = 3;
    } else if (lead >= 0xC0) {
      len = 2;
    }
    len = std::min(len, s.size() - i);
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ') ++j;
    if (j > i) words.push_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

Vocabulary build_vocab(std::span<const std::string> texts, std::size_t vocab_size,
                       std::size_t min_freq) {
  std::map<std::string, std::size_t> word_freq;
  for (const auto& t : texts) {
    for (auto w : split_words(t)) ++word_freq[std::string(w)];
  }

  std::map<std::string, std::size_t> char_freq;
  for (const auto& [word, freq] : word_freq) {
    for (auto c : utf8_chars(word)) char_freq[std::string(c)] += freq;
  }

  std::vector<std::string> tokens = special_tokens();
  std::map<std::string, int, std::less<>> symbol_id;
  auto add_token = [&](const std::string& tok) {
    auto [it, inserted] = symbol_id.emplace(tok, static_cast<int>(tokens.size()));
    if (inserted) tokens.push_back(tok);
    return it->second;
  };

  std::vector<std::string> alphabet;
  for (const auto& [c, freq] : char_freq) {
    if (freq >= min_freq) alphabet.push_back(c);
  }
  const std::size_t required = special_tokens().size() + 2 * alphabet.size();
  if (vocab_size < required) {
    throw ConfigError("vocab_size " + std::to_string(vocab_size) + " cannot hold the " +
                      std::to_string(special_tokens().size()) + " specials and " +
                      std::to_string(2 * alphabet.size()) + " character tokens (need " +
                      std::to_string(required) + ")");
  }
  for (const auto& c : alphabet) {
    add_token(c);
    add_token(std::string(kContinuationPrefix) + c);
  }

  // Words as symbol-id sequences; words with characters outside the alphabet
  // can never be covered and take no part in merging.
  struct Word {
    std::vector<int> symbols;
    std::size_t freq;
  };
  std::vector<Word> words;
  for (const auto& [word, freq] : word_freq) {
    Word w{{}, freq};
    bool covered = true;
    bool first = true;
    for (auto c : utf8_chars(word)) {
      std::string form = first ? std::string(c) : std::string(kContinuationPrefix) + std::string(c);
      first = false;
      auto it = symbol_id.find(form);
      if (it == symbol_id.end()) {
        covered = false;
        break;
      }
      w.symbols.push_back(it->second);
    }
    if (covered && w.symbols.size() > 1) words.push_back(std::move(w));
  }

  auto pair_key = [](int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  };

  while (tokens.size() < vocab_size) {
    std::unordered_map<std::uint64_t, std::size_t> pair_count;
    for (const auto& w : words) {
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) {
        pair_count[pair_key(w.symbols[i], w.symbols[i + 1])] += w.freq;
      }
    }
    bool found = false;
    std::size_t best_count = 0;
    int best_left = 0;
    int best_right = 0;
    for (const auto& [key, count] : pair_count) {
      const int left = static_cast<int>(key >> 32);
      const int right = static_cast<int>(key & 0xffffffffu);
      bool better = !found || count > best_count;
      if (found && count == best_count) {
        const auto& l = tokens[static_cast<std::size_t>(left)];
        const auto& r = tokens[static_cast<std::size_t>(right)];
        const auto& bl = tokens[static_cast<std::size_t>(best_left)];
        const auto& br = tokens[static_cast<std::size_t>(best_right)];
        better = l < bl || (l == bl && r < br);
      }
      if (better) {
        found = true;
        best_count = count;
        best_left = left;
        best_right = right;
      }
    }
    if (!found || best_count < min_freq) break;

    const std::string merged = tokens[static_cast<std::size_t>(best_left)] +
                               tokens[static_cast<std::size_t>(best_right)].substr(kContinuationPrefix.size());
    const int merged_id = add_token(merged);
    for (auto& w : words) {
      std::vector<int> next;
      next.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size(); ++i) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == best_left && w.symbols[i + 1] == best_right) {
          next.push_back(merged_id);
          ++i;
        } else {
          next.push_back(w.symbols[i]);
        }
      }
      w.symbols = std::move(next);
    }
    std::erase_if(words, [](const Word& w) { return w.symbols.size() < 2; });
  }
  return Vocabulary(std::move(tokens));
}

std::vector<int> wordpiece(std::string_view word, const Vocabulary& vocab) {
  const auto chars = utf8_chars(word);
  if (chars.empty()) return {};
  if (chars.size() > kMaxWordChars) return {kUnkId};

  std::vector<int> pieces;
  std::size_t start = 0;
  std::string candidate;
  while (start < chars.size()) {
    int match = -1;
    std::size_t end = chars.size();
    for (; end > start; --end) {
      const std::size_t begin_byte = static_cast<std::size_t>(chars[start].data() - word.data());
      const std::size_t end_byte =
          static_cast<std::size_t>(chars[end - 1].data() - word.data()) + chars[end - 1].size();
      candidate.clear();
      if (start > 0) candidate += kContinuationPrefix;
      candidate += word.substr(begin_byte, end_byte - begin_byte);
      match = vocab.id_of(candidate);
      if (match >= 0) break;
    }
    if (match < 0) return {kUnkId};
    pieces.push_back(match);
    start = end;
  }
  return pieces;
}

std::vector<int> tokenize(std::string_view text, const Vocabulary& vocab) {
  std::vector<int> ids;
  for (auto w : split_words(text)) {
    auto pieces = wordpiece(w, vocab);
    ids.insert(ids.end(), pieces.begin(), pieces.end());
  }
  return ids;
}

Encoding encode(std::string_view text, const Vocabulary& vocab, std::size_t max_seq) {
  if (max_seq < 2) throw ConfigError("max_seq must be at least 2");
  auto pieces = tokenize(text, vocab);
  if (pieces.size() > max_seq - 2) pieces.resize(max_seq - 2);

  Encoding e;
  e.ids.assign(max_seq, kPadId);
  e.attention_mask.assign(max_seq, 0);
  e.ids[0] = kClsId;
  std::copy(pieces.begin(), pieces.end(), e.ids.begin() + 1);
  e.true_length = pieces.size() + 2;
  e.ids[e.true_length - 1] = kSepId;
  std::fill(e.attention_mask.begin(), e.attention_mask.begin() + static_cast<std::ptrdiff_t>(e.true_length), 1);
  return e;
}

std::string decode(std::span<const int> ids, const Vocabulary& vocab) {
  std::string out;
  bool have_word = false;
  for (int id : ids) {
    const std::string& tok = vocab.token(id);
    if (Vocabulary::is_special(id)) continue;
    if (tok.starts_with(kContinuationPrefix) && tok.size() > kContinuationPrefix.size()) {
      out += tok.substr(kContinuationPrefix.size());
    } else {
      if (have_word) out += ' ';
      out += tok;
    }
    have_word = true;
  }
  return out;
}

}  // namespace adtext
