#include "adtext/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "adtext/random.hpp"

namespace adtext {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566ULL;
constexpr std::uint64_t kDropoutStream = 0x64726f70ULL;
constexpr std::uint64_t kMaskStream = 0x6d61736bULL;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

int argmax_row(const Tensor<float>& t, std::size_t r) {
  const auto row = t.row(r);
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

SelectMetric parse_select_metric(std::string_view name) {
  if (name == "accuracy") return SelectMetric::accuracy;
  if (name == "weighted_f1") return SelectMetric::weighted_f1;
  throw ConfigError("unknown select_metric '" + std::string(name) + "' (accuracy|weighted_f1)");
}

std::string_view to_string(SelectMetric metric) {
  return metric == SelectMetric::accuracy ? "accuracy" : "weighted_f1";
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("train config: " + msg); };
  if (epochs < 1) fail("epochs must be at least 1");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) fail("warmup_fraction must lie in [0, 1]");
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) fail("mask_rate must lie in (0, 1)");
}

double learning_rate_at(const TrainConfig& config, std::size_t step, std::size_t total_steps) {
  const auto warmup = static_cast<std::size_t>(std::ceil(config.warmup_fraction * static_cast<double>(total_steps)));
  if (warmup == 0 || step >= warmup) return config.learning_rate;
  return config.learning_rate * static_cast<double>(step) / static_cast<double>(warmup);
}

std::string TrainTrace::to_csv() const {
  std::string out = "iteration,train_loss,train_acc,test_acc,test_weighted_f1\n";
  for (const auto& r : records) {
    out += std::to_string(r.iteration) + "," + format_double(r.train_loss) + "," +
           format_double(r.train_accuracy) + "," + format_double(r.test_accuracy) + "," +
           format_double(r.test_weighted_f1) + "\n";
  }
  return out;
}

std::size_t select_iteration(std::span<const IterationRecord> records, SelectMetric metric) {
  std::size_t best = 0;
  double best_value = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double v = metric == SelectMetric::accuracy ? records[i].test_accuracy : records[i].test_weighted_f1;
    if (best == 0 || v > best_value) {
      best = i + 1;
      best_value = v;
    }
  }
  return best;
}

MaskedEncoding mask_tokens(const Encoding& encoding, const Vocabulary& vocab, double mask_rate,
                           std::uint64_t seed) {
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw ConfigError("mask_rate must lie in (0, 1)");
  MaskedEncoding out{encoding, {}, {}};
  Rng rng(seed);
  const int vocab_size = vocab.size();
  for (std::size_t i = 0; i < encoding.true_length; ++i) {
    const int id = encoding.ids[i];
    if (Vocabulary::is_special(id) || !encoding.attention_mask[i]) continue;
    if (rng.uniform() >= mask_rate) continue;
    out.positions.push_back(i);
    out.original_ids.push_back(id);
    const double r = rng.uniform();
    if (r < 0.8) {
      out.masked.ids[i] = kMaskId;
    } else if (r < 0.9) {
      out.masked.ids[i] = vocab_size > kNumSpecials
                              ? kNumSpecials + static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab_size - kNumSpecials)))
                              : kMaskId;
    }
  }
  return out;
}

template <typename T>
void Adam<T>::step(std::span<Parameter<T>* const> params, std::size_t t, double lr) {
  if (t < 1) throw ConfigError("Adam step index must be >= 1");
  for (const auto* p : params) {
    if (!p->grad.all_finite()) throw NumericError("non-finite gradient in parameter " + p->name);
  }
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->value.size(), T(0));
      v_.emplace_back(p->value.size(), T(0));
    }
  }
  if (m_.size() != params.size()) throw ConfigError("Adam: parameter list changed between steps");

  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
  const T b1 = T(beta1_), b2 = T(beta2_);
  const T step_size = T(lr / correction1);
  const T inv_sqrt_c2 = T(1.0 / std::sqrt(correction2));
  const T eps = T(eps_);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter<T>& p = *params[k];
    std::vector<T>& m = m_[k];
    std::vector<T>& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const T g = p.grad[i];
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      p.value[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_sqrt_c2 + eps);
    }
    p.zero_grad();
  }
}

template class Adam<float>;
template class Adam<double>;

std::vector<Encoding> encode_all(std::span<const std::string> texts, const Vocabulary& vocab,
                                 std::size_t max_seq) {
  std::vector<Encoding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(encode(t, vocab, max_seq));
  return out;
}

std::vector<Encoding> encode_all(std::span<const LabeledExample> examples, const Vocabulary& vocab,
                                 std::size_t max_seq) {
  std::vector<Encoding> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back(encode(e.text, vocab, max_seq));
  return out;
}

Tensor<float> predict_proba(const ModelParams<float>& params, std::span<const Encoding> encodings,
                            std::size_t batch_size) {
  const std::size_t c = params.config.num_classes;
  Tensor<float> probs({encodings.size(), c});
  for (std::size_t begin = 0; begin < encodings.size(); begin += batch_size) {
    const auto batch = encodings.subspan(begin, std::min(batch_size, encodings.size() - begin));
    const Tensor<float> p = softmax(classify(params, batch));
    std::copy(p.values().begin(), p.values().end(), probs.data() + begin * c);
  }
  return probs;
}

std::vector<int> predict(const ModelParams<float>& params, std::span<const Encoding> encodings,
                         std::size_t batch_size) {
  std::vector<int> labels;
  labels.reserve(encodings.size());
  for (std::size_t begin = 0; begin < encodings.size(); begin += batch_size) {
    const auto batch = encodings.subspan(begin, std::min(batch_size, encodings.size() - begin));
    const Tensor<float> logits = classify(params, batch);
    for (std::size_t r = 0; r < logits.rows(); ++r) labels.push_back(argmax_row(logits, r));
  }
  return labels;
}

ConfusionMatrix evaluate(const ModelParams<float>& params, std::span<const Encoding> encodings,
                         std::span<const int> labels, const LabelMap& label_map, std::size_t batch_size) {
  const auto predicted = predict(params, encodings, batch_size);
  return confusion(labels, predicted, static_cast<std::size_t>(label_map.size()), label_map.names());
}

FinetuneResult finetune(const DatasetSplit& split, Checkpoint model, const TrainConfig& config,
                        const IterationCallback& on_iteration) {
  config.validate();
  if (split.train.empty() || split.test.empty()) throw InputError("finetune needs non-empty train and test sets");
  if (model.config.num_classes != static_cast<std::size_t>(model.labels.size())) {
    throw ConfigError("model has " + std::to_string(model.config.num_classes) + " outputs for " +
                      std::to_string(model.labels.size()) + " labels");
  }

  const std::size_t max_seq = model.config.max_seq;
  const auto train_enc = encode_all(split.train, model.vocab, max_seq);
  const auto test_enc = encode_all(split.test, model.vocab, max_seq);
  std::vector<int> train_labels, test_labels;
  for (const auto& e : split.train) train_labels.push_back(e.label);
  for (const auto& e : split.test) test_labels.push_back(e.label);

  ModelParams<float>& params = model.params;
  params.zero_grad();
  const auto param_list = params.parameters();
  Adam<float> adam(config);

  const std::size_t batches_per_epoch = (train_enc.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches_per_epoch * config.epochs;
  std::size_t step = 0;

  FinetuneResult result;
  std::vector<std::size_t> order(train_enc.size());
  std::vector<Encoding> batch_enc;
  std::vector<int> batch_labels;
  double best_value = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, kShuffleStream, epoch));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      batch_enc.clear();
      batch_labels.clear();
      for (std::size_t i = b * config.batch_size; i < std::min(order.size(), (b + 1) * config.batch_size); ++i) {
        batch_enc.push_back(train_enc[order[i]]);
        batch_labels.push_back(train_labels[order[i]]);
      }
      double loss = 0.0;
      try {
        Tape<float> tape;
        Var logits = classify(tape, params, batch_enc, Mode::train, derive_seed(config.seed, kDropoutStream, epoch, b));
        Var l = cross_entropy(tape, logits, batch_labels);
        loss = tape.value(l)[0];
        const Tensor<float>& lv = tape.value(logits);
        for (std::size_t r = 0; r < lv.rows(); ++r) correct += argmax_row(lv, r) == batch_labels[r];
        tape.backward(l);
        ++step;
        adam.step(param_list, step, learning_rate_at(config, step, total_steps));
      } catch (const NumericError& e) {
        throw DivergedError(std::string("training diverged in iteration ") + std::to_string(epoch) + ": " + e.what(),
                            result.trace);
      }
      if (!std::isfinite(loss)) {
        throw DivergedError("training loss became non-finite in iteration " + std::to_string(epoch), result.trace);
      }
      loss_sum += loss * static_cast<double>(batch_enc.size());
    }

    const ConfusionMatrix test_cm = evaluate(params, test_enc, test_labels, model.labels);
    const ClassReport report = class_report(test_cm);
    IterationRecord rec;
    rec.iteration = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_enc.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_enc.size());
    rec.test_accuracy = report.accuracy;
    rec.test_weighted_f1 = report.weighted.f1;
    result.trace.records.push_back(rec);
    if (on_iteration) on_iteration(rec);

    const double value = config.select_metric == SelectMetric::accuracy ? rec.test_accuracy : rec.test_weighted_f1;
    if (value > best_value) {
      best_value = value;
      result.best = model;
      result.best_test_confusion = test_cm;
    }
  }
  result.trace.selected_iteration = select_iteration(result.trace.records, config.select_metric);
  result.best.params.zero_grad();
  return result;
}

MlmEvaluation evaluate_mlm(const ModelParams<float>& params, std::span<const Encoding> encodings,
                           const Vocabulary& vocab, double mask_rate, std::uint64_t seed, std::size_t k,
                           std::size_t batch_size) {
  MlmEvaluation out;
  double loss_sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t begin = 0; begin < encodings.size(); begin += batch_size) {
    std::vector<Encoding> batch;
    std::vector<std::vector<std::size_t>> positions;
    std::vector<int> targets;
    for (std::size_t i = begin; i < std::min(encodings.size(), begin + batch_size); ++i) {
      auto m = mask_tokens(encodings[i], vocab, mask_rate, derive_seed(seed, kMaskStream, i));
      batch.push_back(std::move(m.masked));
      positions.push_back(std::move(m.positions));
      targets.insert(targets.end(), m.original_ids.begin(), m.original_ids.end());
    }
    if (targets.empty()) continue;
    const Tensor<float> logits = mlm_forward(params, batch, positions);
    const std::size_t v = logits.cols();
    for (std::size_t r = 0; r < logits.rows(); ++r) {
      const auto row = logits.row(r);
      const float mx = *std::max_element(row.begin(), row.end());
      double total = 0.0;
      for (float x : row) total += std::exp(static_cast<double>(x - mx));
      const float target_logit = row[static_cast<std::size_t>(targets[r])];
      loss_sum += -(static_cast<double>(target_logit - mx) - std::log(total));
      std::size_t above = 0;
      for (std::size_t j = 0; j < v; ++j) above += row[j] > target_logit;
      hits += above < k;
    }
    out.masked_count += targets.size();
  }
  if (out.masked_count > 0) {
    out.loss = loss_sum / static_cast<double>(out.masked_count);
    out.top_k_accuracy = static_cast<double>(hits) / static_cast<double>(out.masked_count);
  }
  return out;
}

PretrainResult pretrain_mlm(std::span<const std::string> texts, Checkpoint model, const TrainConfig& config,
                            const std::function<void(std::size_t, double)>& on_iteration) {
  // Zero iterations is allowed here and returns the initialization unchanged.
  TrainConfig checked = config;
  checked.epochs = std::max<std::size_t>(checked.epochs, 1);
  checked.validate();
  const auto encodings = encode_all(texts, model.vocab, model.config.max_seq);
  ModelParams<float>& params = model.params;
  params.zero_grad();
  const auto param_list = params.parameters();
  Adam<float> adam(config);

  PretrainResult result;
  result.initial_loss =
      evaluate_mlm(params, encodings, model.vocab, config.mask_rate, derive_seed(config.seed, kMaskStream)).loss;

  const std::size_t batches_per_epoch = (encodings.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = batches_per_epoch * config.epochs;
  std::size_t step = 0;
  std::vector<std::size_t> order(encodings.size());
  TrainTrace partial;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, kShuffleStream, epoch));
    shuffle_rng.shuffle(std::span<std::size_t>(order));

    double loss_sum = 0.0;
    std::size_t masked_total = 0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      std::vector<Encoding> batch;
      std::vector<std::vector<std::size_t>> positions;
      std::vector<int> targets;
      for (std::size_t i = b * config.batch_size; i < std::min(order.size(), (b + 1) * config.batch_size); ++i) {
        auto m = mask_tokens(encodings[order[i]], model.vocab, config.mask_rate,
                             derive_seed(config.seed, kMaskStream, epoch, order[i]));
        batch.push_back(std::move(m.masked));
        positions.push_back(std::move(m.positions));
        targets.insert(targets.end(), m.original_ids.begin(), m.original_ids.end());
      }
      if (targets.empty()) continue;
      ++step;
      try {
        Tape<float> tape;
        Var logits = mlm_logits(tape, params, batch, positions, Mode::train,
                                derive_seed(config.seed, kDropoutStream, epoch, b));
        Var l = cross_entropy(tape, logits, targets);
        const double loss = tape.value(l)[0];
        if (!std::isfinite(loss)) throw NumericError("non-finite MLM loss");
        tape.backward(l);
        adam.step(param_list, step, learning_rate_at(config, step, total_steps));
        loss_sum += loss * static_cast<double>(targets.size());
        masked_total += targets.size();
      } catch (const NumericError& e) {
        throw DivergedError(std::string("pretraining diverged in iteration ") + std::to_string(epoch) + ": " + e.what(),
                            partial);
      }
    }
    const double mean = masked_total ? loss_sum / static_cast<double>(masked_total) : 0.0;
    result.epoch_losses.push_back(mean);
    partial.records.push_back({epoch, mean, 0.0, 0.0, 0.0});
    if (on_iteration) on_iteration(epoch, mean);
  }
  params.zero_grad();
  result.checkpoint = std::move(model);
  return result;
}

}  // namespace adtext
