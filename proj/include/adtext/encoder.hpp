#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adtext/autograd.hpp"
#include "adtext/tokenizer.hpp"

namespace adtext {

// Encoder hyperparameters. Defaults are the desk-scale toy model; the
// BERT-base sizes (768 hidden, 12 layers, 12 heads, 512 positions,
// 32000 tokens) are accepted too.
struct ModelConfig {
  std::size_t hidden_size = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t max_seq = 64;
  std::size_t vocab_size = 4000;
  std::size_t intermediate_size = 256;
  std::size_t num_classes = 12;
  double dropout_rate = 0.1;

  void validate() const;  // throws ConfigError
  bool operator==(const ModelConfig&) const = default;
};

inline constexpr double kLayerNormEps = 1e-12;

template <typename T>
struct LayerParams {
  Parameter<T> query_w, query_b;
  // No key bias: it adds the same q·b term to every logit of a query row,
  // which the softmax cancels.
  Parameter<T> key_w;
  Parameter<T> value_w, value_b;
  Parameter<T> output_w, output_b;
  Parameter<T> attention_norm_gain, attention_norm_bias;
  Parameter<T> ffn_in_w, ffn_in_b;
  Parameter<T> ffn_out_w, ffn_out_b;
  Parameter<T> ffn_norm_gain, ffn_norm_bias;
};

// All trainable weights. The MLM output layer reuses token_embeddings.
template <typename T>
struct ModelParams {
  ModelConfig config;
  Parameter<T> token_embeddings;     // [vocab, hidden]
  Parameter<T> position_embeddings;  // [max_seq, hidden]
  Parameter<T> embedding_norm_gain, embedding_norm_bias;
  std::vector<LayerParams<T>> layers;
  Parameter<T> pooler_w, pooler_b;          // [hidden, hidden]
  Parameter<T> classifier_w, classifier_b;  // [hidden, num_classes]
  Parameter<T> mlm_bias;                    // [vocab]

  ModelParams() = default;
  // Zero weights, unit layer-norm gains.
  explicit ModelParams(const ModelConfig& config);
  // Truncated normal (std 0.02) weights, zero biases, unit layer-norm gains.
  static ModelParams init(const ModelConfig& config, std::uint64_t seed);

  // Stable order; checkpoints are written in this order.
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;

  void zero_grad();

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out(config);
    auto dst = out.parameters();
    auto src = parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<U>();
    return out;
  }
};

enum class Mode { train, eval };

template <typename T>
struct EncoderOutput {
  Var hidden;  // [batch * effective_len, hidden]
  Var pooled;  // [batch, hidden]
  std::size_t batch = 0;
  // Positions past the last unmasked one in the batch are not computed:
  // no unmasked position can attend to them.
  std::size_t effective_len = 0;
  std::vector<Tensor<T>> attention_weights;  // per layer [batch, heads, len, len], if requested
};

// Embeddings -> layer norm -> N x (attention, add & norm, GELU feed-forward,
// add & norm) -> tanh pooler over position 0. Dropout only in train mode,
// driven by `seed`.
template <typename T>
EncoderOutput<T> forward_encode(Tape<T>& tape, ModelParams<T>& params, std::span<const Encoding> batch,
                                Mode mode, std::uint64_t seed, bool keep_attention = false);
template <typename T>
EncoderOutput<T> forward_encode(Tape<T>& tape, const ModelParams<T>& params,
                                std::span<const Encoding> batch, Mode mode, std::uint64_t seed,
                                bool keep_attention = false);

// Classification logits [batch, num_classes] on the tape.
template <typename T>
Var classify(Tape<T>& tape, ModelParams<T>& params, std::span<const Encoding> batch, Mode mode,
             std::uint64_t seed);

// Vocabulary logits [total_masked, vocab] at the given positions, through
// the tied embedding matrix.
template <typename T>
Var mlm_logits(Tape<T>& tape, ModelParams<T>& params, std::span<const Encoding> batch,
               std::span<const std::vector<std::size_t>> masked_positions, Mode mode,
               std::uint64_t seed);

template <typename T>
struct EncodedBatch {
  Tensor<T> hidden_states;  // [batch, max_seq, hidden]; zero past the effective length
  Tensor<T> pooled;         // [batch, hidden]
  std::vector<Tensor<T>> attention_weights;
};

// Tape-free evaluation helpers.
template <typename T>
EncodedBatch<T> encode_batch(const ModelParams<T>& params, std::span<const Encoding> batch,
                             Mode mode = Mode::eval, std::uint64_t seed = 0,
                             bool keep_attention = false);
template <typename T>
Tensor<T> classify(const ModelParams<T>& params, std::span<const Encoding> batch);
template <typename T>
Tensor<T> mlm_forward(const ModelParams<T>& params, std::span<const Encoding> batch,
                      std::span<const std::vector<std::size_t>> masked_positions);

}  // namespace adtext
