#include "adtext/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "adtext/checkpoint.hpp"
#include "adtext/corpus.hpp"
#include "adtext/errors.hpp"
#include "adtext/random.hpp"
#include "adtext/run_config.hpp"
#include "adtext/tokenizer.hpp"
#include "adtext/train.hpp"

namespace adtext {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kHeadStream = 0x68656164;
constexpr std::uint64_t kMlmEvalStream = 0x6d6c6d65;

struct Flags {
  std::string data;
  std::string config;
  std::string out;
  std::optional<std::string> seed, train_fraction, epochs, format, vocab_size, min_freq;
  std::vector<std::string> overrides;
  std::string checkpoint;
  std::string init;
  std::string vocab;
  std::string confusion;
  std::vector<std::string> texts;
};

void add_shared(CLI::App* app, Flags& f) {
  app->add_option("--data", f.data, "corpus file (.jsonl, or .csv with id,category_name,text)");
  app->add_option("--config", f.config, "config file of `key = value` lines");
  app->add_option("--seed", f.seed, "random seed (default 42)");
  app->add_option("--out", f.out, "output directory");
  app->add_option("--train-fraction", f.train_fraction, "stratified train share (default 0.7)");
  app->add_option("--epochs", f.epochs, "training iterations (default 10)");
  app->add_option("--format", f.format, "report format: text, markdown or csv (default text)");
  app->add_option("--set", f.overrides, "override any config key, as key=value (repeatable)");
}

std::string defaults_help() {
  RunConfig defaults;
  std::string text = "Config keys and defaults (flags override the --config file):\n";
  for (const auto& k : RunConfig::keys()) text += "  " + k + " = " + defaults.get(k) + "\n";
  text += "Exit codes: 0 success, 2 input or config error, 3 numeric divergence.\n";
  return text;
}

RunConfig resolve(const Flags& f) {
  RunConfig rc;
  if (!f.config.empty()) rc.load_file(f.config);
  const std::pair<const std::optional<std::string>*, const char*> direct[] = {
      {&f.seed, "seed"},     {&f.train_fraction, "train_fraction"}, {&f.epochs, "epochs"},
      {&f.format, "format"}, {&f.vocab_size, "vocab_size"},         {&f.min_freq, "min_freq"},
  };
  for (const auto& [value, key] : direct) {
    if (*value) rc.set(key, **value);
  }
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    std::string key = kv.substr(0, eq);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    rc.set(key, kv.substr(eq + 1));
  }
  rc.validate();
  return rc;
}

fs::path prepare_out(const Flags& f, const RunConfig& rc) {
  const fs::path dir = f.out.empty() ? fs::path("out") : fs::path(f.out);
  fs::create_directories(dir);
  std::ofstream(dir / "config.resolved", std::ios::binary) << rc.to_text();
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

std::vector<RawRecord> load_preprocessed(const Flags& f, bool turkish, std::ostream& err) {
  require(f.data, "--data");
  const auto raw = load_corpus(f.data, format_for_path(f.data));
  auto records = preprocess(raw, turkish);
  err << "loaded " << raw.size() << " records, " << records.size() << " after normalization and dedup\n";
  if (records.empty()) throw EmptyCorpusError("no usable records in " + f.data);
  return records;
}

std::vector<std::string> texts_of(std::span<const RawRecord> records) {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.text);
  return out;
}

std::vector<std::string> texts_of(std::span<const LabeledExample> examples) {
  std::vector<std::string> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(e.text);
  return out;
}

ModelConfig model_config(const RunConfig& rc, const Vocabulary& vocab, const LabelMap& labels) {
  ModelConfig m = rc.model;
  m.vocab_size = static_cast<std::size_t>(vocab.size());
  m.num_classes = static_cast<std::size_t>(std::max(labels.size(), 2));
  m.validate();
  return m;
}

Vocabulary vocab_for(const Flags& f, const RunConfig& rc, std::span<const std::string> texts,
                     std::ostream& err) {
  if (!f.vocab.empty()) return Vocabulary::load(f.vocab);
  auto vocab = build_vocab(texts, rc.vocab_size, rc.min_freq);
  err << "built vocabulary of " << vocab.size() << " tokens\n";
  return vocab;
}

void write_report_files(const fs::path& dir, const ConfusionMatrix& cm, const std::string& report,
                        ReportFormat format) {
  write_file(dir / ("report." + std::string(report_extension(format))), report);
  write_file(dir / "confusion.csv", cm.to_csv());
}

int cmd_build_vocab(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig rc = resolve(f);
  const auto records = load_preprocessed(f, rc.turkish_lowercase, err);
  const auto vocab = build_vocab(texts_of(records), rc.vocab_size, rc.min_freq);
  const fs::path dir = prepare_out(f, rc);
  vocab.save(dir / "vocab.txt");
  err << "wrote " << vocab.size() << " tokens\n";
  out << (dir / "vocab.txt").string() << "\n";
  return kExitOk;
}

int cmd_pretrain(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig rc = resolve(f);
  const auto records = load_preprocessed(f, rc.turkish_lowercase, err);
  const auto texts = texts_of(records);
  Checkpoint ckpt;
  ckpt.vocab = vocab_for(f, rc, texts, err);
  ckpt.labels = LabelMap::from_records(records);
  ckpt.turkish_lowercase = rc.turkish_lowercase;
  ckpt.config = model_config(rc, ckpt.vocab, ckpt.labels);
  ckpt.params = ModelParams<float>::init(ckpt.config, derive_seed(rc.train.seed, kInitStream));
  const fs::path dir = prepare_out(f, rc);

  const auto result = pretrain_mlm(texts, std::move(ckpt), rc.train, [&](std::size_t it, double loss) {
    err << "pretrain iteration " << it << " mlm_loss " << loss << "\n";
  });
  std::string trace = "iteration,mlm_loss\n";
  char line[64];
  std::snprintf(line, sizeof line, "0,%.10g\n", result.initial_loss);
  trace += line;
  for (std::size_t i = 0; i < result.epoch_losses.size(); ++i) {
    std::snprintf(line, sizeof line, "%zu,%.10g\n", i + 1, result.epoch_losses[i]);
    trace += line;
  }
  result.checkpoint.save(dir / "pretrain.ckpt");
  write_file(dir / "pretrain_trace.csv", trace);
  const auto encodings = encode_all(texts, result.checkpoint.vocab, result.checkpoint.config.max_seq);
  const auto mlm = evaluate_mlm(result.checkpoint.params, encodings, result.checkpoint.vocab, rc.train.mask_rate,
                                derive_seed(rc.train.seed, kMlmEvalStream));
  err << "final mlm loss " << mlm.loss << ", top-5 accuracy " << mlm.top_k_accuracy << " over "
      << mlm.masked_count << " masked tokens\n";
  out << (dir / "pretrain.ckpt").string() << "\n" << (dir / "pretrain_trace.csv").string() << "\n";
  return kExitOk;
}

// Starts from a pretrained encoder; the classification head is fresh when the
// label set differs from the one stored in the checkpoint.
Checkpoint from_pretrained(const std::string& path, const RunConfig& rc, const LabelMap& labels,
                           std::ostream& err) {
  Checkpoint base = Checkpoint::load(path);
  Checkpoint ckpt;
  ckpt.vocab = base.vocab;
  ckpt.labels = labels;
  ckpt.turkish_lowercase = rc.turkish_lowercase;
  ckpt.config = base.config;
  ckpt.config.dropout_rate = rc.model.dropout_rate;
  ckpt.config.num_classes = static_cast<std::size_t>(std::max(labels.size(), 2));
  ckpt.params = ModelParams<float>::init(ckpt.config, derive_seed(rc.train.seed, kHeadStream));
  auto dst = ckpt.params.parameters();
  auto src = base.params.parameters();
  const bool same_head = base.labels == labels;
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const bool head = dst[i]->name.rfind("classifier.", 0) == 0;
    if (!head || same_head) dst[i]->value = src[i]->value;
  }
  err << "initialized from " << path << (same_head ? "" : " with a new classification head") << "\n";
  return ckpt;
}

int cmd_finetune(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig rc = resolve(f);
  const auto records = load_preprocessed(f, rc.turkish_lowercase, err);
  const LabelMap labels = LabelMap::from_records(records);
  const auto examples = label_examples(records, labels);
  const auto split = stratified_split(examples, rc.train_fraction, rc.train.seed, labels.names());
  err << "split: " << split.train.size() << " train, " << split.test.size() << " test\n";

  Checkpoint ckpt;
  if (!f.init.empty()) {
    ckpt = from_pretrained(f.init, rc, labels, err);
  } else {
    ckpt.vocab = vocab_for(f, rc, texts_of(split.train), err);
    ckpt.labels = labels;
    ckpt.turkish_lowercase = rc.turkish_lowercase;
    ckpt.config = model_config(rc, ckpt.vocab, labels);
    ckpt.params = ModelParams<float>::init(ckpt.config, derive_seed(rc.train.seed, kInitStream));
  }
  const fs::path dir = prepare_out(f, rc);

  auto log = [&](const IterationRecord& r) {
    err << "iteration " << r.iteration << " train_loss " << r.train_loss << " train_acc " << r.train_accuracy
        << " test_acc " << r.test_accuracy << " test_weighted_f1 " << r.test_weighted_f1 << "\n";
  };
  FinetuneResult result;
  try {
    result = finetune(split, std::move(ckpt), rc.train, log);
  } catch (const DivergedError& e) {
    write_file(dir / "trace.csv", e.trace().to_csv());
    throw;
  }
  err << "selected iteration " << result.trace.selected_iteration << "\n";
  const std::string report = render_report(class_report(result.best_test_confusion), rc.format);
  result.best.save(dir / "model.ckpt");
  write_file(dir / "trace.csv", result.trace.to_csv());
  write_report_files(dir, result.best_test_confusion, report, rc.format);
  out << report;
  return kExitOk;
}

int cmd_evaluate(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig rc = resolve(f);
  require(f.checkpoint, "--checkpoint");
  const Checkpoint ckpt = Checkpoint::load(f.checkpoint);
  const auto records = load_preprocessed(f, ckpt.turkish_lowercase, err);
  for (const auto& r : records) {
    if (!ckpt.labels.contains(r.category_name)) {
      throw InputError("label '" + r.category_name + "' is not known to the checkpoint");
    }
  }
  const auto examples = label_examples(records, ckpt.labels);
  std::vector<int> truth;
  for (const auto& e : examples) truth.push_back(e.label);
  const auto encodings = encode_all(examples, ckpt.vocab, ckpt.config.max_seq);
  const ConfusionMatrix cm = evaluate(ckpt.params, encodings, truth, ckpt.labels);
  const std::string report = render_report(class_report(cm), rc.format);
  if (!f.out.empty()) write_report_files(prepare_out(f, rc), cm, report, rc.format);
  out << report;
  return kExitOk;
}

int cmd_predict(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig rc = resolve(f);
  require(f.checkpoint, "--checkpoint");
  const Checkpoint ckpt = Checkpoint::load(f.checkpoint);
  std::vector<std::string> texts = f.texts;
  if (!f.data.empty()) {
    for (const auto& r : load_corpus(f.data, format_for_path(f.data))) texts.push_back(r.text);
  }
  if (texts.empty()) throw InputError("no texts to classify");
  std::vector<std::string> normalized;
  for (const auto& t : texts) normalized.push_back(normalize(t, ckpt.turkish_lowercase));
  const auto encodings = encode_all(normalized, ckpt.vocab, ckpt.config.max_seq);
  const Tensor<float> proba = predict_proba(ckpt.params, encodings);
  const int classes = ckpt.labels.size();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto row = proba.row(i);
    int best = 0;
    nlohmann::ordered_json probs = nlohmann::ordered_json::object();
    for (int c = 0; c < classes; ++c) {
      if (row[c] > row[best]) best = c;
      probs[ckpt.labels.name(c)] = static_cast<double>(row[c]);
    }
    nlohmann::ordered_json line;
    line["text"] = texts[i];
    line["label"] = ckpt.labels.name(best);
    line["label_id"] = best;
    line["probabilities"] = probs;
    out << line.dump() << "\n";
  }
  err << "classified " << texts.size() << " texts\n";
  if (!f.out.empty()) prepare_out(f, rc);
  return kExitOk;
}

int cmd_stats(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig rc = resolve(f);
  const auto records = load_preprocessed(f, rc.turkish_lowercase, err);
  const LabelMap labels = LabelMap::from_records(records);
  std::vector<std::size_t> counts(static_cast<std::size_t>(labels.size()), 0);
  std::map<std::size_t, std::size_t> histogram;
  for (const auto& r : records) {
    ++counts[static_cast<std::size_t>(labels.index(r.category_name))];
    ++histogram[word_count(r.text)];
  }
  std::string category_csv = "category,count\n";
  for (int c = 0; c < labels.size(); ++c) {
    category_csv += csv_escape(labels.name(c)) + "," + std::to_string(counts[static_cast<std::size_t>(c)]) + "\n";
  }
  std::string histogram_csv = "word_count,frequency\n";
  for (const auto& [words, n] : histogram) histogram_csv += std::to_string(words) + "," + std::to_string(n) + "\n";
  const fs::path dir = prepare_out(f, rc);
  write_file(dir / "category_counts.csv", category_csv);
  write_file(dir / "word_count_histogram.csv", histogram_csv);
  out << (dir / "category_counts.csv").string() << "\n" << (dir / "word_count_histogram.csv").string() << "\n";
  return kExitOk;
}

int cmd_report(const Flags& f, std::ostream& out, std::ostream&) {
  const RunConfig rc = resolve(f);
  require(f.confusion, "--confusion");
  std::ifstream in(f.confusion, std::ios::binary);
  if (!in) throw InputError("cannot open " + f.confusion);
  std::ostringstream buf;
  buf << in.rdbuf();
  const ConfusionMatrix cm = ConfusionMatrix::from_csv(buf.str());
  const std::string report = render_report(class_report(cm), rc.format);
  if (!f.out.empty()) {
    write_file(prepare_out(f, rc) / ("report." + std::string(report_extension(rc.format))), report);
  }
  out << report;
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ad text classification with a small transformer encoder", "adtext"};
  app.footer(defaults_help());
  app.require_subcommand(1);
  Flags f;

  auto* build = app.add_subcommand("build-vocab", "build a WordPiece vocabulary from a corpus");
  add_shared(build, f);
  build->add_option("--vocab-size", f.vocab_size, "target vocabulary size (default 4000)");
  build->add_option("--min-freq", f.min_freq, "minimum symbol and pair frequency (default 1)");

  auto* pretrain = app.add_subcommand("pretrain", "masked-language-model pretraining");
  add_shared(pretrain, f);
  pretrain->add_option("--vocab", f.vocab, "existing vocabulary file");
  pretrain->add_option("--vocab-size", f.vocab_size, "target vocabulary size when building one");
  pretrain->add_option("--min-freq", f.min_freq, "minimum frequency when building a vocabulary");

  auto* finetune_cmd = app.add_subcommand("finetune", "train the classifier and report on the test split");
  add_shared(finetune_cmd, f);
  finetune_cmd->add_option("--init", f.init, "pretrained checkpoint to start from");
  finetune_cmd->add_option("--vocab", f.vocab, "existing vocabulary file");
  finetune_cmd->add_option("--vocab-size", f.vocab_size, "target vocabulary size when building one");
  finetune_cmd->add_option("--min-freq", f.min_freq, "minimum frequency when building a vocabulary");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "classify a labeled corpus and print a report");
  add_shared(evaluate_cmd, f);
  evaluate_cmd->add_option("--checkpoint", f.checkpoint, "trained checkpoint");

  auto* predict_cmd = app.add_subcommand("predict", "print one JSON line per text with class probabilities");
  add_shared(predict_cmd, f);
  predict_cmd->add_option("--checkpoint", f.checkpoint, "trained checkpoint");
  predict_cmd->add_option("texts", f.texts, "texts to classify");

  auto* stats = app.add_subcommand("stats", "category counts and word-count histogram");
  add_shared(stats, f);

  auto* report = app.add_subcommand("report", "render a classification report from a confusion CSV");
  add_shared(report, f);
  report->add_option("--confusion", f.confusion, "confusion matrix CSV");

  std::vector<std::string> argv_storage{"adtext"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (build->parsed()) return cmd_build_vocab(f, out, err);
    if (pretrain->parsed()) return cmd_pretrain(f, out, err);
    if (finetune_cmd->parsed()) return cmd_finetune(f, out, err);
    if (evaluate_cmd->parsed()) return cmd_evaluate(f, out, err);
    if (predict_cmd->parsed()) return cmd_predict(f, out, err);
    if (stats->parsed()) return cmd_stats(f, out, err);
    if (report->parsed()) return cmd_report(f, out, err);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace adtext
