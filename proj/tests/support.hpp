#pragma once

#include <string>
#include <vector>

#include "adtext/encoder.hpp"
#include "adtext/grad_check.hpp"
#include "adtext/random.hpp"
#include "adtext/tokenizer.hpp"

namespace adtext::testing {

// hidden 16, 2 layers, 2 heads, vocab 50, max_seq 8.
inline ModelConfig toy_config(std::size_t num_classes = 3) {
  ModelConfig c;
  c.hidden_size = 16;
  c.num_layers = 2;
  c.num_heads = 2;
  c.intermediate_size = 32;
  c.vocab_size = 50;
  c.max_seq = 8;
  c.num_classes = num_classes;
  c.dropout_rate = 0.1;
  return c;
}

// Random [CLS] ids... [SEP] [PAD]... with true_length in [min_len, max_seq].
inline Encoding random_encoding(Rng& rng, std::size_t vocab_size, std::size_t max_seq, std::size_t min_len = 2) {
  Encoding e;
  e.true_length = min_len + rng.below(max_seq - min_len + 1);
  e.ids.assign(max_seq, kPadId);
  e.attention_mask.assign(max_seq, 0);
  for (std::size_t p = 0; p < e.true_length; ++p) {
    e.attention_mask[p] = 1;
    e.ids[p] = kNumSpecials + static_cast<int>(rng.below(vocab_size - kNumSpecials));
  }
  e.ids[0] = kClsId;
  e.ids[e.true_length - 1] = kSepId;
  return e;
}

// A generic parameter point: every entry N(0, scale^2), layer-norm gains
// centered on 1. At the std 0.02 training init many attention gradients are
// around 1e-11, below what central differences resolve in double precision.
inline ModelParams<double> spread_params(const ModelConfig& config, std::uint64_t seed, double scale = 0.25) {
  auto params = ModelParams<double>::init(config, seed);
  Rng rng(derive_seed(seed, 2));
  for (auto* p : params.parameters()) {
    const double center = p->name.find("gain") != std::string::npos ? 1.0 : 0.0;
    for (auto& v : p->value.values()) v = center + scale * rng.normal();
  }
  return params;
}

struct GradCheckProblem {
  ModelParams<double> params;
  std::vector<Encoding> batch;
  std::vector<int> labels;
  std::uint64_t dropout_seed = 0;

  // Mean cross-entropy of classify() in train mode with a fixed dropout seed.
  LossBuilder loss() {
    return [this](Tape<double>& tape) {
      return cross_entropy(tape, classify(tape, params, batch, Mode::train, dropout_seed), labels);
    };
  }
};

inline GradCheckProblem grad_check_problem(std::uint64_t seed, ModelParams<double> params, std::size_t batch_size = 2) {
  GradCheckProblem problem{std::move(params), {}, {}, seed};
  const ModelConfig& config = problem.params.config;
  Rng rng(derive_seed(seed, 1));
  for (std::size_t i = 0; i < batch_size; ++i) {
    problem.batch.push_back(random_encoding(rng, config.vocab_size, config.max_seq, 3));
    problem.labels.push_back(static_cast<int>(rng.below(config.num_classes)));
  }
  return problem;
}

// Every parameter entry of the toy model, step 1e-5.
inline GradCheckResult full_model_grad_check(std::uint64_t seed) {
  auto problem = grad_check_problem(seed, spread_params(toy_config(), seed));
  auto list = problem.params.parameters();
  return grad_check(problem.loss(), list, 1e-5);
}

}  // namespace adtext::testing

#include <span>

#include "adtext/metrics.hpp"

namespace adtext::testing {

// Per-class precision/recall/F1 by counting label pairs directly, without a
// confusion matrix. Zero denominators give 0.
struct PairCountScores {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

inline PairCountScores pair_count_scores(std::span<const int> truth, std::span<const int> pred, int c) {
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (pred[i] == c && truth[i] == c) ++tp;
    else if (pred[i] == c) ++fp;
    else if (truth[i] == c) ++fn;
  }
  PairCountScores s;
  if (tp + fp) s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn) s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (s.precision + s.recall > 0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

// Checks `trials` random (truth, prediction) sequences with C <= 6 classes
// and n <= 200 pairs; returns the number of mismatching values.
inline std::size_t metrics_brute_force_mismatches(std::uint64_t seed, int trials) {
  Rng rng(seed);
  std::size_t mismatches = 0;
  for (int t = 0; t < trials; ++t) {
    const int classes = 1 + static_cast<int>(rng.below(6));
    const std::size_t n = 1 + rng.below(200);
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
      // Bias toward correct predictions so both easy and hard cases occur.
      pred[i] = rng.uniform() < 0.5 ? truth[i] : static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
    }
    const auto cm = confusion(truth, pred, static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c) {
      const auto got = precision_recall_f1(cm, static_cast<std::size_t>(c));
      const auto want = pair_count_scores(truth, pred, c);
      mismatches += (got.precision != want.precision) + (got.recall != want.recall) + (got.f1 != want.f1);
    }
  }
  return mismatches;
}

// The published per-class results: precision, recall, F1, support.
struct TableRow {
  double precision, recall, f1;
  std::uint64_t support;
};

inline const std::vector<TableRow>& published_table() {
  static const std::vector<TableRow> rows = {
      {0.90, 0.95, 0.92, 353}, {0.99, 0.77, 0.87, 97},  {0.92, 0.92, 0.92, 414}, {0.93, 0.87, 0.90, 378},
      {0.88, 0.87, 0.87, 187}, {0.78, 0.84, 0.81, 25},  {0.95, 0.94, 0.90, 474}, {0.87, 0.93, 0.91, 560},
      {0.92, 0.90, 0.94, 444}, {0.91, 0.98, 0.94, 168}, {0.94, 0.93, 0.94, 363}, {0.87, 0.82, 0.84, 125},
  };
  return rows;
}

inline std::vector<ClassRow> published_rows() {
  std::vector<ClassRow> out;
  for (std::size_t i = 0; i < published_table().size(); ++i) {
    const auto& r = published_table()[i];
    out.push_back({std::to_string(i), r.precision, r.recall, r.f1, r.support});
  }
  return out;
}

}  // namespace adtext::testing
