#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "adtext/corpus.hpp"
#include "adtext/errors.hpp"
#include "adtext/random.hpp"

using namespace adtext;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto dir = std::filesystem::temp_directory_path() / "adtext_corpus_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

// Random strings over a mix of ASCII, Turkish letters, punctuation, symbols
// and whitespace.
std::string random_text(Rng& rng) {
  static const std::vector<std::string> pieces = {
      "a", "B", "ç", "Ç", "ğ", "Ğ", "ı", "I", "İ", "i", "ö", "Ş", "ü", "Ü", " ", "  ", "\t", "&", "!",
      "?", ",", ".", "-", "€", "%", "7/24", "₺", "©", "“", "”", "'", "ISPARTA", "Vize", "x", "Z", "é", "😀"};
  std::string out;
  const auto n = rng.below(20);
  for (std::size_t i = 0; i < n; ++i) out += pieces[rng.below(pieces.size())];
  return out;
}

}  // namespace

TEST_CASE("jsonl record keeps the text") {
  const auto path = temp_file(
      "one.jsonl", "{\"id\":\"0\",\"category\":\"Vize İşlemleri\",\"text\":\"Evraksız Rusya Vizesi\"}\n");
  const auto records = load_corpus(path, CorpusFormat::jsonl);
  REQUIRE(records.size() == 1);
  CHECK(records[0].id == "0");
  CHECK(records[0].category_name == "Vize İşlemleri");
  CHECK(records[0].text == "Evraksız Rusya Vizesi");
}

TEST_CASE("empty corpus file is rejected") {
  const auto path = temp_file("empty.jsonl", "");
  CHECK_THROWS_AS(load_corpus(path, CorpusFormat::jsonl), EmptyCorpusError);
  CHECK_THROWS_AS(parse_csv("id,category,text\n"), EmptyCorpusError);
}

TEST_CASE("missing corpus file names the path") {
  try {
    load_corpus("/nonexistent/ads.jsonl", CorpusFormat::jsonl);
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("/nonexistent/ads.jsonl") != std::string::npos);
  }
}

TEST_CASE("malformed jsonl reports the line number") {
  const std::string content =
      "{\"id\":\"0\",\"category\":\"A\",\"text\":\"x\"}\n"
      "{\"id\":\"1\",\"text\":\"y\"}\n";
  try {
    parse_jsonl(content);
    FAIL("expected an error");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("category") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_jsonl("not json\n"), InputError);
}

TEST_CASE("csv quoted comma stays inside the field") {
  const std::string content =
      "id,category,text\n"
      "7,\"Nakliyat, Kargo\",\"Evden eve, şehirler arası \"\"nakliyat\"\"\"\n";
  const auto records = parse_csv(content);
  REQUIRE(records.size() == 1);
  CHECK(records[0].id == "7");
  CHECK(records[0].category_name == "Nakliyat, Kargo");
  CHECK(records[0].text == "Evden eve, şehirler arası \"nakliyat\"");
}

TEST_CASE("csv field with embedded newline and column order from header") {
  const std::string content = "text,id,category\r\n\"iki\nsatır\",3,A\r\n";
  const auto records = parse_csv(content);
  REQUIRE(records.size() == 1);
  CHECK(records[0].text == "iki\nsatır");
  CHECK(records[0].id == "3");
  CHECK(records[0].category_name == "A");
}

TEST_CASE("csv escape round trips through the parser") {
  for (const std::string field : {"plain", "a,b", "say \"hi\"", "line\nbreak", ""}) {
    const auto rows = split_csv(csv_escape(field) + ",end\n");
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].size() == 2);
    CHECK(rows[0][0] == field);
    CHECK(rows[0][1] == "end");
  }
}

TEST_CASE("normalize examples") {
  CHECK(normalize("Hızlı & Kolay Vize İşlemleri") == "hızlı kolay vize işlemleri");
  CHECK(normalize("") == "");
  CHECK(normalize("ISPARTA", true) == "ısparta");
  CHECK(normalize("ISPARTA", false) == "isparta");
  CHECK(normalize("Çiçek&Çikolata") == "çiçek çikolata");
  CHECK(normalize("  7/24   Açık!!  ") == "7 24 açık");
  CHECK(normalize("İstanbul'da 50₺ indirim") == "istanbul da 50 indirim");
}

TEST_CASE("normalize is idempotent on random text") {
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const std::string x = random_text(rng);
    for (bool turkish : {true, false}) {
      const std::string once = normalize(x, turkish);
      CHECK(normalize(once, turkish) == once);
      CHECK(once.find("  ") == std::string::npos);
      if (!once.empty()) {
        CHECK(once.front() != ' ');
        CHECK(once.back() != ' ');
      }
    }
  }
}

TEST_CASE("dedup examples") {
  const RawRecord a{"1", "X", "aynı metin"};
  const RawRecord a2{"2", "X", "aynı metin"};
  const RawRecord b{"3", "X", "başka"};
  const RawRecord other_cat{"4", "Y", "aynı metin"};
  const std::vector<RawRecord> in{a, a2, b};
  CHECK(dedup(in) == std::vector<RawRecord>{a, b});
  const std::vector<RawRecord> two_cats{a, other_cat};
  CHECK(dedup(two_cats) == two_cats);
  const std::vector<RawRecord> unique{a, b, other_cat};
  CHECK(dedup(unique) == unique);
}

TEST_CASE("dedup is idempotent and never grows") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RawRecord> records;
    const auto n = rng.below(30);
    for (std::size_t i = 0; i < n; ++i) {
      records.push_back({std::to_string(i), std::string(1, static_cast<char>('A' + rng.below(3))),
                         "t" + std::to_string(rng.below(6))});
    }
    const auto once = dedup(records);
    CHECK(once.size() <= records.size());
    CHECK(dedup(once) == once);
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& r : once) keys.insert({r.text, r.category_name});
    CHECK(keys.size() == once.size());
  }
}

TEST_CASE("preprocess drops texts that normalize to nothing") {
  const std::vector<RawRecord> raw{{"1", "A", "!!!"}, {"2", "A", "Vize!"}, {"3", "A", "vize"}};
  const auto out = preprocess(raw, true);
  REQUIRE(out.size() == 1);
  CHECK(out[0].id == "2");
  CHECK(out[0].text == "vize");
}

TEST_CASE("label map is sorted and round trips") {
  const LabelMap labels({"Yurtlar", "Tur Acenteleri", "Çiçek Siparişi", "Yurtlar"});
  CHECK(labels.size() == 3);
  for (int i = 0; i < labels.size(); ++i) CHECK(labels.index(labels.name(i)) == i);
  CHECK(std::is_sorted(labels.names().begin(), labels.names().end()));
  CHECK_THROWS_AS(labels.index("Bilinmeyen"), InputError);
}

namespace {

std::vector<LabeledExample> make_examples(const std::vector<std::size_t>& per_class) {
  std::vector<LabeledExample> out;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    for (std::size_t i = 0; i < per_class[c]; ++i) {
      out.push_back({std::to_string(c) + "-" + std::to_string(i), "t", static_cast<int>(c)});
    }
  }
  return out;
}

std::size_t count_label(const std::vector<LabeledExample>& v, int label) {
  return static_cast<std::size_t>(
      std::count_if(v.begin(), v.end(), [&](const LabeledExample& e) { return e.label == label; }));
}

std::set<std::string> ids(const std::vector<LabeledExample>& v) {
  std::set<std::string> out;
  for (const auto& e : v) out.insert(e.id);
  return out;
}

}  // namespace

TEST_CASE("stratified split examples") {
  const auto hundred = make_examples({100});
  const auto s = stratified_split(hundred, 0.7, 1);
  CHECK(s.train.size() == 70);
  CHECK(s.test.size() == 30);

  const auto pairs = make_examples({2, 2, 2});
  const auto half = stratified_split(pairs, 0.5, 9);
  for (int c = 0; c < 3; ++c) {
    CHECK(count_label(half.train, c) == 1);
    CHECK(count_label(half.test, c) == 1);
  }

  const auto again = stratified_split(hundred, 0.7, 1);
  CHECK(ids(again.train) == ids(s.train));
  CHECK(ids(again.test) == ids(s.test));
  const auto other_seed = stratified_split(hundred, 0.7, 2);
  CHECK(ids(other_seed.train) != ids(s.train));
}

TEST_CASE("stratified split rejects tiny classes and bad fractions") {
  const auto examples = make_examples({5, 1});
  try {
    stratified_split(examples, 0.7, 1, std::vector<std::string>{"Büyük", "Küçük"});
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("Küçük") != std::string::npos);
  }
  const auto ok = make_examples({4, 4});
  CHECK_THROWS_AS(stratified_split(ok, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(stratified_split(ok, 1.0, 1), ConfigError);
}

TEST_CASE("stratified split invariants on random inputs") {
  Rng rng(2024);
  for (int trial = 0; trial < 150; ++trial) {
    std::vector<std::size_t> sizes(1 + rng.below(6));
    for (auto& n : sizes) n = 2 + rng.below(60);
    const double fraction = 0.05 + 0.9 * rng.uniform();
    const auto examples = make_examples(sizes);
    const auto s = stratified_split(examples, fraction, rng.next());
    CHECK(s.train.size() + s.test.size() == examples.size());
    const auto tr = ids(s.train);
    const auto te = ids(s.test);
    std::vector<std::string> both;
    std::set_intersection(tr.begin(), tr.end(), te.begin(), te.end(), std::back_inserter(both));
    CHECK(both.empty());
    std::set<std::string> all = tr;
    all.insert(te.begin(), te.end());
    CHECK(all == ids(examples));
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      const auto expected = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(sizes[c]) + 0.5));
      CHECK(count_label(s.train, static_cast<int>(c)) == expected);
    }
  }
}

TEST_CASE("word count") {
  CHECK(word_count("") == 0);
  CHECK(word_count("vize") == 1);
  CHECK(word_count("hızlı kolay vize") == 3);
}
