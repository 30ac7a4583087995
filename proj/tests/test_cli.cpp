#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "adtext/checkpoint.hpp"
#include "adtext/cli.hpp"
#include "adtext/corpus.hpp"
#include "adtext/synthetic.hpp"
#include "adtext/train.hpp"
#include "support.hpp"

using namespace adtext;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "adtext_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& p, const std::string& content) { std::ofstream(p, std::ios::binary) << content; }

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// 12 categories x `per_class` texts.
fs::path synthetic_file(const fs::path& dir, std::size_t per_class) {
  SyntheticOptions o;
  o.texts_per_class = per_class;
  o.seed = 3;
  const auto path = dir / "ads.jsonl";
  spit(path, to_jsonl(synthetic_ad_corpus(o)));
  return path;
}

std::vector<std::string> small_model_flags() {
  return {"--set", "hidden_size=16", "--set", "intermediate_size=32", "--set", "num_heads=2", "--set", "max_seq=16"};
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("build-vocab writes the specials first and is reproducible") {
  const auto dir = scratch("vocab");
  const auto data = synthetic_file(dir, 10);
  const std::string before = slurp(data);
  const auto r = run({"build-vocab", "--data", data.string(), "--out", (dir / "a").string(), "--vocab-size", "300"});
  REQUIRE(r.code == 0);
  const auto vocab_lines = lines(slurp(dir / "a" / "vocab.txt"));
  REQUIRE(vocab_lines.size() <= 300);
  for (std::size_t i = 0; i < 5; ++i) CHECK(vocab_lines[i] == special_tokens()[i]);
  CHECK(fs::exists(dir / "a" / "config.resolved"));
  CHECK(slurp(dir / "a" / "config.resolved").find("vocab_size = 300") != std::string::npos);

  REQUIRE(run({"build-vocab", "--data", data.string(), "--out", (dir / "b").string(), "--vocab-size", "300"}).code == 0);
  CHECK(slurp(dir / "a" / "vocab.txt") == slurp(dir / "b" / "vocab.txt"));
  CHECK(slurp(data) == before);
}

TEST_CASE("missing data file exits 2 and names the path") {
  const auto r = run({"build-vocab", "--data", "/no/such/ads.jsonl", "--out", scratch("missing").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("/no/such/ads.jsonl") != std::string::npos);
  CHECK(r.out.empty());
}

TEST_CASE("config errors exit 2") {
  const auto dir = scratch("config");
  const auto data = synthetic_file(dir, 4);
  CHECK(run({"stats", "--data", data.string(), "--set", "nonsense=1"}).code == 2);
  CHECK(run({"stats", "--data", data.string(), "--train-fraction", "1.5"}).code == 2);
  CHECK(run({"stats", "--data", data.string(), "--set", "num_heads=5"}).code == 2);
  CHECK(run({"stats", "--data", data.string(), "--config", (dir / "absent.conf").string()}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"finetune", "--help"}).code == 0);
}

TEST_CASE("flags override the config file") {
  const auto dir = scratch("precedence");
  const auto data = synthetic_file(dir, 4);
  spit(dir / "run.conf", "# settings\nepochs = 7\nseed = 5\nformat = markdown\n");
  const auto r = run({"stats", "--data", data.string(), "--config", (dir / "run.conf").string(), "--epochs", "2",
                      "--out", (dir / "o").string()});
  REQUIRE(r.code == 0);
  const std::string resolved = slurp(dir / "o" / "config.resolved");
  CHECK(resolved.find("epochs = 2\n") != std::string::npos);
  CHECK(resolved.find("seed = 5\n") != std::string::npos);
  CHECK(resolved.find("format = markdown\n") != std::string::npos);
}

TEST_CASE("finetune writes all artifacts and honors the split fraction") {
  const auto dir = scratch("finetune");
  const auto data = synthetic_file(dir, 20);
  const std::string before = slurp(data);
  const auto args = concat({"finetune", "--data", data.string(), "--out", (dir / "run").string(), "--epochs", "2",
                            "--train-fraction", "0.8", "--format", "csv"},
                           small_model_flags());
  const auto r = run(args);
  INFO(r.err);
  REQUIRE(r.code == 0);
  for (const char* name : {"model.ckpt", "trace.csv", "report.csv", "confusion.csv", "config.resolved"}) {
    CHECK(fs::exists(dir / "run" / name));
  }
  const auto ckpt = Checkpoint::load(dir / "run" / "model.ckpt");
  CHECK(ckpt.labels.size() == 12);
  const auto trace = split_csv(slurp(dir / "run" / "trace.csv"));
  REQUIRE(trace.size() == 3);
  CHECK(trace[0][0] == "iteration");
  const auto cm = ConfusionMatrix::from_csv(slurp(dir / "run" / "confusion.csv"));
  CHECK(cm.total() == 12 * 4);
  for (std::size_t c = 0; c < 12; ++c) CHECK(cm.support(c) == 4);
  const auto report = split_csv(slurp(dir / "run" / "report.csv"));
  CHECK(report.size() == 15);
  CHECK(r.out == slurp(dir / "run" / "report.csv"));
  CHECK(slurp(data) == before);
}

TEST_CASE("finetune with identical seeds produces identical traces") {
  const auto dir = scratch("determinism");
  const auto data = synthetic_file(dir, 8);
  const auto base = concat({"finetune", "--data", data.string(), "--epochs", "2", "--seed", "9"}, small_model_flags());
  REQUIRE(run(concat(base, {"--out", (dir / "a").string()})).code == 0);
  REQUIRE(run(concat(base, {"--out", (dir / "b").string()})).code == 0);
  CHECK(slurp(dir / "a" / "trace.csv") == slurp(dir / "b" / "trace.csv"));
  CHECK(slurp(dir / "a" / "model.ckpt") == slurp(dir / "b" / "model.ckpt"));
}

TEST_CASE("pretrain then finetune from the pretrained encoder") {
  const auto dir = scratch("pretrain");
  const auto data = synthetic_file(dir, 6);
  const auto p = run(concat({"pretrain", "--data", data.string(), "--out", (dir / "p").string(), "--epochs", "2"},
                            small_model_flags()));
  INFO(p.err);
  REQUIRE(p.code == 0);
  const auto trace = lines(slurp(dir / "p" / "pretrain_trace.csv"));
  REQUIRE(trace.size() == 4);
  CHECK(trace[0] == "iteration,mlm_loss");
  const auto f = run({"finetune", "--data", data.string(), "--init", (dir / "p" / "pretrain.ckpt").string(), "--out",
                      (dir / "f").string(), "--epochs", "1"});
  INFO(f.err);
  REQUIRE(f.code == 0);
  const auto pre = Checkpoint::load(dir / "p" / "pretrain.ckpt");
  const auto fine = Checkpoint::load(dir / "f" / "model.ckpt");
  CHECK(fine.vocab == pre.vocab);
  CHECK(fine.config.hidden_size == 16);
}

TEST_CASE("evaluate reproduces the overfit oracle and checks labels") {
  const auto dir = scratch("evaluate");
  const std::vector<RawRecord> records = {
      {"0", "Vize", "Vize başvuru"}, {"1", "Vize", "Hızlı vize"},   {"2", "Vize", "Vize evrak"},
      {"3", "Vize", "Kolay vize işlemleri"}, {"4", "Çiçek", "Çiçek buket"}, {"5", "Çiçek", "Taze çiçek"},
      {"6", "Çiçek", "Orkide çiçek"}, {"7", "Çiçek", "Gül buket sipariş"}};
  spit(dir / "train.jsonl", to_jsonl(records));
  const auto normalized = preprocess(records, true);
  const LabelMap labels = LabelMap::from_records(normalized);
  DatasetSplit split;
  split.train = label_examples(normalized, labels);
  split.test = split.train;
  Checkpoint model;
  std::vector<std::string> texts;
  for (const auto& r : normalized) texts.push_back(r.text);
  model.vocab = build_vocab(texts, 200);
  model.labels = labels;
  model.config = adtext::testing::toy_config(2);
  model.config.vocab_size = static_cast<std::size_t>(model.vocab.size());
  model.params = ModelParams<float>::init(model.config, 5);
  TrainConfig c;
  c.epochs = 40;
  c.batch_size = 8;
  c.learning_rate = 2e-3;
  c.select_metric = SelectMetric::accuracy;
  finetune(split, model, c).best.save(dir / "model.ckpt");

  const auto r = run({"evaluate", "--checkpoint", (dir / "model.ckpt").string(), "--data",
                      (dir / "train.jsonl").string(), "--format", "csv", "--out", (dir / "eval").string()});
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto rows = split_csv(r.out);
  REQUIRE(rows.size() == 5);
  CHECK(rows[3][0] == "accuracy");
  CHECK(rows[3][3] == "1.00");
  CHECK(fs::exists(dir / "eval" / "confusion.csv"));

  spit(dir / "other.jsonl", "{\"id\":\"1\",\"category\":\"Yurtlar\",\"text\":\"öğrenci yurdu\"}\n");
  const auto bad = run({"evaluate", "--checkpoint", (dir / "model.ckpt").string(), "--data",
                        (dir / "other.jsonl").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("Yurtlar") != std::string::npos);

  spit(dir / "empty.jsonl", "");
  CHECK(run({"evaluate", "--checkpoint", (dir / "model.ckpt").string(), "--data", (dir / "empty.jsonl").string()})
            .code == 2);
}

TEST_CASE("predict prints one distribution per text") {
  const auto dir = scratch("predict");
  Checkpoint model;
  model.vocab = build_vocab(std::vector<std::string>{"vize işlemleri", "çiçek siparişi"}, 100);
  model.labels = LabelMap(synthetic_categories());
  model.config = adtext::testing::toy_config(12);
  model.config.vocab_size = static_cast<std::size_t>(model.vocab.size());
  model.params = ModelParams<float>::init(model.config, 8);
  model.params.classifier_w.value.fill(0.0f);
  model.save(dir / "zero.ckpt");

  const auto r = run({"predict", "--checkpoint", (dir / "zero.ckpt").string(), "Hızlı Vize", "Çiçek Siparişi",
                      "bilinmeyen kelimeler"});
  REQUIRE(r.code == 0);
  const auto out = lines(r.out);
  REQUIRE(out.size() == 3);
  for (const auto& line : out) {
    const auto j = nlohmann::json::parse(line);
    double total = 0.0;
    REQUIRE(j["probabilities"].size() == 12);
    for (const auto& [name, p] : j["probabilities"].items()) {
      CHECK(model.labels.contains(name));
      CHECK(p.get<double>() == doctest::Approx(1.0 / 12.0).epsilon(1e-6));
      total += p.get<double>();
    }
    CHECK(std::abs(total - 1.0) <= 1e-6);
    CHECK(j["label"].get<std::string>() == model.labels.name(j["label_id"].get<int>()));
  }
  CHECK(run({"predict", "--checkpoint", (dir / "zero.ckpt").string()}).code == 2);
  CHECK(run({"predict", "--checkpoint", (dir / "missing.ckpt").string(), "x"}).code == 2);
}

TEST_CASE("stats counts categories and words") {
  const auto dir = scratch("stats");
  spit(dir / "three.jsonl",
       "{\"id\":\"1\",\"category\":\"A\",\"text\":\"bir iki\"}\n"
       "{\"id\":\"2\",\"category\":\"B\",\"text\":\"üç\"}\n"
       "{\"id\":\"3\",\"category\":\"A\",\"text\":\"dört beş altı\"}\n");
  REQUIRE(run({"stats", "--data", (dir / "three.jsonl").string(), "--out", (dir / "s3").string()}).code == 0);
  CHECK(slurp(dir / "s3" / "category_counts.csv") == "category,count\nA,2\nB,1\n");
  CHECK(slurp(dir / "s3" / "word_count_histogram.csv") == "word_count,frequency\n1,1\n2,1\n3,1\n");

  spit(dir / "one.csv", "id,category,text\n1,A,Vize!\n");
  REQUIRE(run({"stats", "--data", (dir / "one.csv").string(), "--out", (dir / "s1").string()}).code == 0);
  CHECK(slurp(dir / "s1" / "word_count_histogram.csv") == "word_count,frequency\n1,1\n");

  // Independent tally of the synthetic file, line by line.
  const auto data = synthetic_file(dir, 15);
  std::map<std::string, std::size_t> tally;
  std::map<std::size_t, std::size_t> words;
  for (const auto& line : lines(slurp(data))) {
    const auto j = nlohmann::json::parse(line);
    ++tally[j["category"].get<std::string>()];
    std::istringstream ws(j["text"].get<std::string>());
    std::size_t n = 0;
    for (std::string w; ws >> w;) n += w != "&";
    ++words[n];
  }
  REQUIRE(run({"stats", "--data", data.string(), "--out", (dir / "syn").string()}).code == 0);
  const auto counts = split_csv(slurp(dir / "syn" / "category_counts.csv"));
  REQUIRE(counts.size() == tally.size() + 1);
  for (std::size_t i = 1; i < counts.size(); ++i) CHECK(std::stoul(counts[i][1]) == tally.at(counts[i][0]));
  const auto hist = split_csv(slurp(dir / "syn" / "word_count_histogram.csv"));
  REQUIRE(hist.size() == words.size() + 1);
  for (std::size_t i = 1; i < hist.size(); ++i) CHECK(std::stoul(hist[i][1]) == words.at(std::stoul(hist[i][0])));
}

TEST_CASE("report renders a stored confusion matrix") {
  const auto dir = scratch("report");
  ConfusionMatrix cm(2, {"A", "B"});
  cm.add(0, 0, 3);
  cm.add(1, 1, 2);
  cm.add(1, 0, 1);
  spit(dir / "cm.csv", cm.to_csv());
  const auto r = run({"report", "--confusion", (dir / "cm.csv").string(), "--format", "markdown"});
  REQUIRE(r.code == 0);
  CHECK(r.out == render_report(class_report(cm), ReportFormat::markdown));
  CHECK(run({"report", "--confusion", (dir / "nope.csv").string()}).code == 2);
}

TEST_CASE("numeric divergence exits 3") {
  const auto dir = scratch("diverge");
  const auto data = synthetic_file(dir, 4);
  const auto r = run(concat({"finetune", "--data", data.string(), "--out", (dir / "o").string(), "--epochs", "3",
                             "--set", "learning_rate=1e37", "--set", "warmup_fraction=0"},
                            small_model_flags()));
  CHECK(r.code == 3);
  CHECK(fs::exists(dir / "o" / "trace.csv"));
}

TEST_CASE("the installed binary reports exit codes and keeps logs off stdout") {
  const auto dir = scratch("binary");
  const auto data = synthetic_file(dir, 3);
  const std::string bin = ADTEXT_CLI_BINARY;
  const auto status = [](const std::string& cmd) {
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  CHECK(status(bin + " stats --data /no/such.jsonl 2>/dev/null") == 2);
  CHECK(status(bin + " stats --data " + data.string() + " --out " + (dir / "o").string() + " > " +
               (dir / "stdout.txt").string() + " 2> " + (dir / "stderr.txt").string()) == 0);
  CHECK(lines(slurp(dir / "stdout.txt")).size() == 2);
  CHECK(slurp(dir / "stderr.txt").find("loaded") != std::string::npos);
}
