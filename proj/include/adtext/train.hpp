#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adtext/checkpoint.hpp"
#include "adtext/corpus.hpp"
#include "adtext/encoder.hpp"
#include "adtext/errors.hpp"
#include "adtext/metrics.hpp"

namespace adtext {

enum class SelectMetric { accuracy, weighted_f1 };

SelectMetric parse_select_metric(std::string_view name);
std::string_view to_string(SelectMetric metric);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double warmup_fraction = 0.1;  // share of all steps with linear warmup
  double mask_rate = 0.15;
  std::uint64_t seed = 42;
  SelectMetric select_metric = SelectMetric::weighted_f1;

  void validate() const;  // throws ConfigError
};

// Linear warmup from 0 over the first warmup_fraction of total_steps, then
// constant. `step` is 1-based.
double learning_rate_at(const TrainConfig& config, std::size_t step, std::size_t total_steps);

struct IterationRecord {
  std::size_t iteration = 0;  // 1-based epoch number
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double test_weighted_f1 = 0.0;
};

struct TrainTrace {
  std::vector<IterationRecord> records;
  std::size_t selected_iteration = 0;  // 0 when no record exists

  // iteration,train_loss,train_acc,test_acc,test_weighted_f1
  std::string to_csv() const;
};

// Index of the record maximizing the metric, earliest on ties (1-based; 0 if empty).
std::size_t select_iteration(std::span<const IterationRecord> records, SelectMetric metric);

class DivergedError : public NumericError {
 public:
  DivergedError(const std::string& what, TrainTrace trace)
      : NumericError(what), trace_(std::move(trace)) {}
  const TrainTrace& trace() const { return trace_; }

 private:
  TrainTrace trace_;
};

struct MaskedEncoding {
  Encoding masked;
  std::vector<std::size_t> positions;
  std::vector<int> original_ids;
};

// Selects each non-special position independently with probability
// mask_rate; a selected token becomes [MASK] (80%), a random non-special
// token (10%) or stays unchanged (10%).
MaskedEncoding mask_tokens(const Encoding& encoding, const Vocabulary& vocab, double mask_rate,
                           std::uint64_t seed);

// Adam with bias correction. Moments are kept per parameter, by position in
// the list passed to step(); pass the same list every time.
template <typename T>
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  explicit Adam(const TrainConfig& c) : Adam(c.adam_beta1, c.adam_beta2, c.adam_eps) {}

  // t is the 1-based step index. Gradients are zeroed afterwards. Throws
  // NumericError naming the parameter if any gradient is non-finite; no
  // parameter is modified in that case.
  void step(std::span<Parameter<T>* const> params, std::size_t t, double lr);

 private:
  double beta1_, beta2_, eps_;
  std::vector<std::vector<T>> m_, v_;
};

std::vector<Encoding> encode_all(std::span<const std::string> texts, const Vocabulary& vocab,
                                 std::size_t max_seq);
std::vector<Encoding> encode_all(std::span<const LabeledExample> examples, const Vocabulary& vocab,
                                 std::size_t max_seq);

// Eval-mode argmax labels and class probabilities.
std::vector<int> predict(const ModelParams<float>& params, std::span<const Encoding> encodings,
                         std::size_t batch_size = 64);
Tensor<float> predict_proba(const ModelParams<float>& params, std::span<const Encoding> encodings,
                            std::size_t batch_size = 64);

ConfusionMatrix evaluate(const ModelParams<float>& params, std::span<const Encoding> encodings,
                         std::span<const int> labels, const LabelMap& label_map,
                         std::size_t batch_size = 64);

struct FinetuneResult {
  Checkpoint best;
  TrainTrace trace;
  ConfusionMatrix best_test_confusion;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

// Each iteration: deterministic shuffle of train, one pass of minibatch
// cross-entropy with Adam, then evaluation on test. Returns the weights of
// the iteration chosen by config.select_metric.
FinetuneResult finetune(const DatasetSplit& split, Checkpoint model, const TrainConfig& config,
                        const IterationCallback& on_iteration = {});

struct MlmEvaluation {
  double loss = 0.0;
  double top_k_accuracy = 0.0;
  std::size_t masked_count = 0;
};

// Eval-mode MLM loss and top-k hit rate over masks drawn with `seed`.
MlmEvaluation evaluate_mlm(const ModelParams<float>& params, std::span<const Encoding> encodings,
                           const Vocabulary& vocab, double mask_rate, std::uint64_t seed,
                           std::size_t k = 5, std::size_t batch_size = 64);

struct PretrainResult {
  Checkpoint checkpoint;
  double initial_loss = 0.0;        // eval-mode loss before any update
  std::vector<double> epoch_losses;  // mean training loss per iteration
};

PretrainResult pretrain_mlm(std::span<const std::string> texts, Checkpoint model,
                            const TrainConfig& config,
                            const std::function<void(std::size_t, double)>& on_iteration = {});

}  // namespace adtext
