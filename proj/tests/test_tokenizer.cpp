#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "adtext/corpus.hpp"
#include "adtext/errors.hpp"
#include "adtext/random.hpp"
#include "adtext/tokenizer.hpp"

using namespace adtext;

namespace {

Vocabulary vocab_with(std::vector<std::string> extra) {
  std::vector<std::string> tokens = special_tokens();
  tokens.insert(tokens.end(), extra.begin(), extra.end());
  return Vocabulary(std::move(tokens));
}

std::vector<std::string> pieces(std::string_view text, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int id : tokenize(text, vocab)) out.push_back(vocab.token(id));
  return out;
}

}  // namespace

TEST_CASE("build_vocab on a single repeated word") {
  const std::vector<std::string> texts{"ab ab ab"};
  const auto vocab = build_vocab(texts, 100);
  CHECK(vocab.contains("a"));
  CHECK(vocab.contains("##b"));
  CHECK(vocab.contains("ab"));
  for (int i = 0; i < kNumSpecials; ++i) CHECK(vocab.token(i) == special_tokens()[static_cast<std::size_t>(i)]);
  CHECK(pieces("ab", vocab) == std::vector<std::string>{"ab"});
}

TEST_CASE("build_vocab merges follow frequency then lexicographic order") {
  // Alphabet {a, b, c}: 6 character forms. Pair counts: (a,##b) 3, (##b,##c) 1.
  const std::vector<std::string> texts{"ab ab abc"};
  const auto vocab = build_vocab(texts, 5 + 6 + 2);
  REQUIRE(vocab.size() == 13);
  CHECK(vocab.token(11) == "ab");
  CHECK(vocab.token(12) == "abc");
}

TEST_CASE("build_vocab edge cases") {
  CHECK(build_vocab(std::vector<std::string>{}, 10).size() == kNumSpecials);
  const std::vector<std::string> texts{"vize işlemleri", "vize başvurusu"};
  CHECK_THROWS_AS(build_vocab(texts, 8), ConfigError);
  const auto a = build_vocab(texts, 60);
  const auto b = build_vocab(texts, 60);
  CHECK(a.tokens() == b.tokens());
  CHECK(a.size() <= 60);
}

TEST_CASE("min_freq drops rare characters") {
  const std::vector<std::string> texts{"aa aa aa x"};
  const auto vocab = build_vocab(texts, 50, 2);
  CHECK(vocab.contains("a"));
  CHECK_FALSE(vocab.contains("x"));
  CHECK(tokenize("x", vocab) == std::vector<int>{kUnkId});
}

TEST_CASE("encode examples") {
  const auto vocab = vocab_with({"vize", "##ler", "a"});
  const auto empty = encode("", vocab, 6);
  CHECK(empty.ids == std::vector<int>{kClsId, kSepId, kPadId, kPadId, kPadId, kPadId});
  CHECK(empty.true_length == 2);
  CHECK(empty.attention_mask == std::vector<int>{1, 1, 0, 0, 0, 0});

  CHECK(tokenize("qqq", vocab) == std::vector<int>{kUnkId});
  CHECK(tokenize("vizeq", vocab) == std::vector<int>{kUnkId});
  CHECK(pieces("vizeler", vocab) == std::vector<std::string>{"vize", "##ler"});
  CHECK_THROWS_AS(encode("vize", vocab, 1), ConfigError);
}

TEST_CASE("encode truncates to max_seq") {
  const auto vocab = vocab_with({"a"});
  const auto enc = encode("a a a a a a", vocab, 4);
  CHECK(enc.ids == std::vector<int>{kClsId, 5, 5, kSepId});
  CHECK(enc.true_length == 4);
}

TEST_CASE("overlong words map to unknown") {
  const auto vocab = vocab_with({"a", "##a"});
  CHECK(tokenize(std::string(100, 'a'), vocab).size() == 100);
  CHECK(tokenize(std::string(101, 'a'), vocab) == std::vector<int>{kUnkId});
}

TEST_CASE("decode examples") {
  const auto vocab = vocab_with({"vize", "##ler", "kolay"});
  CHECK(decode(std::vector<int>{kClsId, kSepId}, vocab) == "");
  CHECK(decode(std::vector<int>{5, 6}, vocab) == "vizeler");
  CHECK(decode(std::vector<int>{kClsId, 7, 5, 6, kSepId, kPadId}, vocab) == "kolay vizeler");
  CHECK_THROWS_AS(decode(std::vector<int>{99}, vocab), InputError);
  CHECK_THROWS_AS(decode(std::vector<int>{-1}, vocab), InputError);
}

TEST_CASE("vocabulary file round trip") {
  const std::vector<std::string> texts{"hızlı kolay vize", "çiçek siparişi"};
  const auto vocab = build_vocab(texts, 80);
  std::stringstream buf;
  vocab.write(buf);
  const auto back = Vocabulary::read(buf, static_cast<std::size_t>(vocab.size()));
  CHECK(back == vocab);
  CHECK_THROWS_AS(Vocabulary(std::vector<std::string>{"a", "b"}), InputError);
}

namespace {

const std::vector<std::string> kWords = {"vize",   "işlemleri", "hızlı", "kolay",  "çiçek", "sipariş",
                                         "buket",  "yurt",      "öğrenci", "kargo", "nakliyat", "ısparta",
                                         "tur",    "otel",      "ingilizce", "kurs", "oyun",   "konsol"};

std::string random_sentence(Rng& rng, std::size_t max_words) {
  std::string s;
  const auto n = rng.below(max_words + 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += kWords[rng.below(kWords.size())];
  }
  return s;
}

}  // namespace

TEST_CASE("round trip on in-vocabulary text") {
  Rng rng(77);
  std::vector<std::string> corpus;
  for (int i = 0; i < 60; ++i) corpus.push_back(random_sentence(rng, 6));
  corpus.push_back(
      [] {
        std::string all;
        for (const auto& w : kWords) all += w + " ";
        return all;
      }());
  for (std::size_t size : {150u, 400u}) {
    const auto vocab = build_vocab(corpus, size);
    for (const auto& w : kWords) CHECK(decode(encode(w, vocab, 32).ids, vocab) == w);
    for (int i = 0; i < 150; ++i) {
      const std::string text = random_sentence(rng, 5);
      const auto enc = encode(text, vocab, 64);
      CHECK(enc.ids.size() == 64);
      CHECK(decode(enc.ids, vocab) == text);
    }
  }
}

TEST_CASE("encoding layout invariants") {
  Rng rng(3);
  std::vector<std::string> corpus;
  for (int i = 0; i < 30; ++i) corpus.push_back(random_sentence(rng, 8));
  const auto vocab = build_vocab(corpus, 120);
  for (int i = 0; i < 200; ++i) {
    const std::size_t max_seq = 2 + rng.below(20);
    const auto enc = encode(random_sentence(rng, 12), vocab, max_seq);
    REQUIRE(enc.ids.size() == max_seq);
    REQUIRE(enc.attention_mask.size() == max_seq);
    CHECK(enc.ids[0] == kClsId);
    CHECK(enc.ids[enc.true_length - 1] == kSepId);
    for (std::size_t p = 0; p < max_seq; ++p) {
      CHECK(enc.attention_mask[p] == (p < enc.true_length ? 1 : 0));
      if (p >= enc.true_length) CHECK(enc.ids[p] == kPadId);
    }
  }
}

TEST_CASE("greedy matching takes the longest prefix") {
  Rng rng(19);
  std::vector<std::string> corpus;
  for (int i = 0; i < 40; ++i) corpus.push_back(random_sentence(rng, 6));
  const auto vocab = build_vocab(corpus, 90);
  int words_checked = 0;
  for (const auto& word : kWords) {
    const auto ids = wordpiece(word, vocab);
    if (ids.size() == 1 && ids[0] == kUnkId) continue;
    const auto chars = utf8_chars(word);
    std::size_t at = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      std::size_t best = 0;
      for (std::size_t len = 1; at + len <= chars.size(); ++len) {
        std::string cand = at == 0 ? "" : "##";
        for (std::size_t j = at; j < at + len; ++j) cand += chars[j];
        if (vocab.contains(cand)) best = len;
      }
      std::string emitted = at == 0 ? "" : "##";
      for (std::size_t j = at; j < at + best; ++j) emitted += chars[j];
      CHECK(vocab.token(ids[k]) == emitted);
      at += best;
    }
    CHECK(at == chars.size());
    ++words_checked;
  }
  CHECK(words_checked == static_cast<int>(kWords.size()));
}
