#include "adtext/encoder.hpp"

#include <algorithm>
#include <string>

#include "adtext/errors.hpp"
#include "adtext/random.hpp"

namespace adtext {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (hidden_size == 0) fail("hidden_size must be positive");
  if (num_layers == 0) fail("num_layers must be positive");
  if (num_heads == 0 || hidden_size % num_heads != 0) {
    fail("hidden_size " + std::to_string(hidden_size) + " is not divisible by num_heads " +
         std::to_string(num_heads));
  }
  if (max_seq < 2) fail("max_seq must be at least 2");
  if (vocab_size < static_cast<std::size_t>(kNumSpecials)) fail("vocab_size must cover the 5 special tokens");
  if (intermediate_size == 0) fail("intermediate_size must be positive");
  if (num_classes < 2) fail("num_classes must be at least 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
}

namespace {

template <typename T>
void make_layer(LayerParams<T>& l, const ModelConfig& c, std::size_t index) {
  const std::string p = "layers." + std::to_string(index) + ".";
  const std::size_t h = c.hidden_size, f = c.intermediate_size;
  l.query_w = Parameter<T>(p + "attention.query.weight", Tensor<T>({h, h}));
  l.query_b = Parameter<T>(p + "attention.query.bias", Tensor<T>({h}));
  l.key_w = Parameter<T>(p + "attention.key.weight", Tensor<T>({h, h}));
  l.value_w = Parameter<T>(p + "attention.value.weight", Tensor<T>({h, h}));
  l.value_b = Parameter<T>(p + "attention.value.bias", Tensor<T>({h}));
  l.output_w = Parameter<T>(p + "attention.output.weight", Tensor<T>({h, h}));
  l.output_b = Parameter<T>(p + "attention.output.bias", Tensor<T>({h}));
  l.attention_norm_gain = Parameter<T>(p + "attention.norm.gain", Tensor<T>({h}, T(1)));
  l.attention_norm_bias = Parameter<T>(p + "attention.norm.bias", Tensor<T>({h}));
  l.ffn_in_w = Parameter<T>(p + "ffn.in.weight", Tensor<T>({h, f}));
  l.ffn_in_b = Parameter<T>(p + "ffn.in.bias", Tensor<T>({f}));
  l.ffn_out_w = Parameter<T>(p + "ffn.out.weight", Tensor<T>({f, h}));
  l.ffn_out_b = Parameter<T>(p + "ffn.out.bias", Tensor<T>({h}));
  l.ffn_norm_gain = Parameter<T>(p + "ffn.norm.gain", Tensor<T>({h}, T(1)));
  l.ffn_norm_bias = Parameter<T>(p + "ffn.norm.bias", Tensor<T>({h}));
}

template <typename L, typename F>
void visit_layer(L& l, F&& f) {
  f(l.query_w), f(l.query_b), f(l.key_w), f(l.value_w), f(l.value_b);
  f(l.output_w), f(l.output_b), f(l.attention_norm_gain), f(l.attention_norm_bias);
  f(l.ffn_in_w), f(l.ffn_in_b), f(l.ffn_out_w), f(l.ffn_out_b);
  f(l.ffn_norm_gain), f(l.ffn_norm_bias);
}

template <typename M, typename F>
void visit_params(M& m, F&& f) {
  f(m.token_embeddings), f(m.position_embeddings);
  f(m.embedding_norm_gain), f(m.embedding_norm_bias);
  for (auto& l : m.layers) visit_layer(l, f);
  f(m.pooler_w), f(m.pooler_b), f(m.classifier_w), f(m.classifier_b), f(m.mlm_bias);
}

bool is_weight_matrix(const std::string& name) {
  return name.ends_with(".weight") || name.starts_with("embeddings.token") ||
         name.starts_with("embeddings.position");
}

template <typename T, typename P>
Var linear(Tape<T>& tape, Var x, P& w, P& b) {
  return add_bias(tape, matmul(tape, x, tape.param(w)), tape.param(b));
}

template <typename T, typename M>
EncoderOutput<T> forward_impl(Tape<T>& tape, M& params, std::span<const Encoding> batch, Mode mode,
                              std::uint64_t seed, bool keep_attention) {
  const ModelConfig& c = params.config;
  if (batch.empty()) throw ShapeError("forward_encode: empty batch");

  std::size_t len = 1;
  for (const auto& e : batch) {
    if (e.ids.size() != c.max_seq || e.attention_mask.size() != c.max_seq) {
      throw ShapeError("forward_encode: encoding of length " + std::to_string(e.ids.size()) +
                       " does not match max_seq " + std::to_string(c.max_seq));
    }
    for (std::size_t i = c.max_seq; i-- > 0;) {
      if (e.attention_mask[i]) {
        len = std::max(len, i + 1);
        break;
      }
    }
  }

  const std::size_t b = batch.size();
  std::vector<std::size_t> ids(b * len), positions(b * len), cls_rows(b);
  std::vector<int> key_mask(b * len);
  for (std::size_t s = 0; s < b; ++s) {
    cls_rows[s] = s * len;
    for (std::size_t i = 0; i < len; ++i) {
      const int id = batch[s].ids[i];
      if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
        throw InputError("forward_encode: token id " + std::to_string(id) + " outside vocabulary of " +
                         std::to_string(c.vocab_size));
      }
      ids[s * len + i] = static_cast<std::size_t>(id);
      positions[s * len + i] = i;
      key_mask[s * len + i] = batch[s].attention_mask[i] ? 1 : 0;
    }
  }

  const double rate = mode == Mode::train ? c.dropout_rate : 0.0;
  Rng rng(seed);
  const T eps = T(kLayerNormEps);

  EncoderOutput<T> out;
  out.batch = b;
  out.effective_len = len;

  Var x = add(tape, gather_rows(tape, tape.param(params.token_embeddings), ids),
              gather_rows(tape, tape.param(params.position_embeddings), positions));
  x = layer_norm(tape, x, tape.param(params.embedding_norm_gain), tape.param(params.embedding_norm_bias), eps);
  x = dropout(tape, x, rate, rng);

  for (auto& layer : params.layers) {
    Var q = linear(tape, x, layer.query_w, layer.query_b);
    Var k = matmul(tape, x, tape.param(layer.key_w));
    Var v = linear(tape, x, layer.value_w, layer.value_b);
    Tensor<T> weights;
    Var a = attention(tape, q, k, v, key_mask, b, len, c.num_heads, keep_attention ? &weights : nullptr);
    if (keep_attention) out.attention_weights.push_back(std::move(weights));
    a = dropout(tape, linear(tape, a, layer.output_w, layer.output_b), rate, rng);
    x = layer_norm(tape, add(tape, x, a), tape.param(layer.attention_norm_gain),
                   tape.param(layer.attention_norm_bias), eps);

    Var f = gelu(tape, linear(tape, x, layer.ffn_in_w, layer.ffn_in_b));
    f = dropout(tape, linear(tape, f, layer.ffn_out_w, layer.ffn_out_b), rate, rng);
    x = layer_norm(tape, add(tape, x, f), tape.param(layer.ffn_norm_gain), tape.param(layer.ffn_norm_bias), eps);
  }

  out.hidden = x;
  Var cls = gather_rows(tape, x, cls_rows);
  out.pooled = tanh(tape, linear(tape, cls, params.pooler_w, params.pooler_b));
  return out;
}

template <typename T, typename M>
Var classify_impl(Tape<T>& tape, M& params, std::span<const Encoding> batch, Mode mode, std::uint64_t seed) {
  auto enc = forward_impl(tape, params, batch, mode, seed, false);
  const double rate = mode == Mode::train ? params.config.dropout_rate : 0.0;
  Rng rng(derive_seed(seed, 0x636c6173ULL));
  Var pooled = dropout(tape, enc.pooled, rate, rng);
  return linear(tape, pooled, params.classifier_w, params.classifier_b);
}

template <typename T, typename M>
Var mlm_impl(Tape<T>& tape, M& params, std::span<const Encoding> batch,
             std::span<const std::vector<std::size_t>> masked_positions, Mode mode, std::uint64_t seed) {
  if (masked_positions.size() != batch.size()) {
    throw ShapeError("mlm_forward: " + std::to_string(masked_positions.size()) +
                     " position lists for a batch of " + std::to_string(batch.size()));
  }
  for (std::size_t s = 0; s < batch.size(); ++s) {
    for (std::size_t pos : masked_positions[s]) {
      if (pos >= batch[s].true_length) {
        throw InputError("mlm_forward: masked position " + std::to_string(pos) +
                         " outside true length " + std::to_string(batch[s].true_length));
      }
    }
  }
  auto enc = forward_impl(tape, params, batch, mode, seed, false);
  std::vector<std::size_t> rows;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    for (std::size_t pos : masked_positions[s]) rows.push_back(s * enc.effective_len + pos);
  }
  Var picked = gather_rows(tape, enc.hidden, rows);
  Var logits = matmul_bt(tape, picked, tape.param(params.token_embeddings));
  return add_bias(tape, logits, tape.param(params.mlm_bias));
}

}  // namespace

template <typename T>
ModelParams<T>::ModelParams(const ModelConfig& c) : config(c) {
  config.validate();
  const std::size_t h = c.hidden_size;
  token_embeddings = Parameter<T>("embeddings.token", Tensor<T>({c.vocab_size, h}));
  position_embeddings = Parameter<T>("embeddings.position", Tensor<T>({c.max_seq, h}));
  embedding_norm_gain = Parameter<T>("embeddings.norm.gain", Tensor<T>({h}, T(1)));
  embedding_norm_bias = Parameter<T>("embeddings.norm.bias", Tensor<T>({h}));
  layers.resize(c.num_layers);
  for (std::size_t i = 0; i < c.num_layers; ++i) make_layer(layers[i], c, i);
  pooler_w = Parameter<T>("pooler.weight", Tensor<T>({h, h}));
  pooler_b = Parameter<T>("pooler.bias", Tensor<T>({h}));
  classifier_w = Parameter<T>("classifier.weight", Tensor<T>({h, c.num_classes}));
  classifier_b = Parameter<T>("classifier.bias", Tensor<T>({c.num_classes}));
  mlm_bias = Parameter<T>("mlm.bias", Tensor<T>({c.vocab_size}));
}

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& c, std::uint64_t seed) {
  ModelParams<T> m(c);
  Rng rng(seed);
  for (auto* p : m.parameters()) {
    if (!is_weight_matrix(p->name)) continue;
    for (T& v : p->value.values()) v = static_cast<T>(0.02 * rng.truncated_normal());
  }
  return m;
}

template <typename T>
std::vector<Parameter<T>*> ModelParams<T>::parameters() {
  std::vector<Parameter<T>*> out;
  visit_params(*this, [&](Parameter<T>& p) { out.push_back(&p); });
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> ModelParams<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  visit_params(*this, [&](const Parameter<T>& p) { out.push_back(&p); });
  return out;
}

template <typename T>
void ModelParams<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
EncoderOutput<T> forward_encode(Tape<T>& tape, ModelParams<T>& params, std::span<const Encoding> batch,
                                Mode mode, std::uint64_t seed, bool keep_attention) {
  return forward_impl(tape, params, batch, mode, seed, keep_attention);
}

template <typename T>
EncoderOutput<T> forward_encode(Tape<T>& tape, const ModelParams<T>& params,
                                std::span<const Encoding> batch, Mode mode, std::uint64_t seed,
                                bool keep_attention) {
  return forward_impl(tape, params, batch, mode, seed, keep_attention);
}

template <typename T>
Var classify(Tape<T>& tape, ModelParams<T>& params, std::span<const Encoding> batch, Mode mode,
             std::uint64_t seed) {
  return classify_impl(tape, params, batch, mode, seed);
}

template <typename T>
Var mlm_logits(Tape<T>& tape, ModelParams<T>& params, std::span<const Encoding> batch,
               std::span<const std::vector<std::size_t>> masked_positions, Mode mode,
               std::uint64_t seed) {
  return mlm_impl(tape, params, batch, masked_positions, mode, seed);
}

template <typename T>
EncodedBatch<T> encode_batch(const ModelParams<T>& params, std::span<const Encoding> batch, Mode mode,
                             std::uint64_t seed, bool keep_attention) {
  Tape<T> tape(false);
  auto enc = forward_impl(tape, params, batch, mode, seed, keep_attention);
  const std::size_t b = batch.size(), len = enc.effective_len, h = params.config.hidden_size;
  EncodedBatch<T> out;
  out.hidden_states = Tensor<T>({b, params.config.max_seq, h});
  const Tensor<T>& hv = tape.value(enc.hidden);
  for (std::size_t s = 0; s < b; ++s) {
    std::copy_n(hv.data() + s * len * h, len * h, out.hidden_states.data() + s * params.config.max_seq * h);
  }
  out.pooled = tape.value(enc.pooled);
  out.attention_weights = std::move(enc.attention_weights);
  return out;
}

template <typename T>
Tensor<T> classify(const ModelParams<T>& params, std::span<const Encoding> batch) {
  Tape<T> tape(false);
  return tape.value(classify_impl(tape, params, batch, Mode::eval, 0));
}

template <typename T>
Tensor<T> mlm_forward(const ModelParams<T>& params, std::span<const Encoding> batch,
                      std::span<const std::vector<std::size_t>> masked_positions) {
  Tape<T> tape(false);
  return tape.value(mlm_impl(tape, params, batch, masked_positions, Mode::eval, 0));
}

#define ADTEXT_INSTANTIATE_ENCODER(T)                                                                 \
  template struct ModelParams<T>;                                                                     \
  template EncoderOutput<T> forward_encode(Tape<T>&, ModelParams<T>&, std::span<const Encoding>, Mode, \
                                           std::uint64_t, bool);                                      \
  template EncoderOutput<T> forward_encode(Tape<T>&, const ModelParams<T>&, std::span<const Encoding>, \
                                           Mode, std::uint64_t, bool);                                \
  template Var classify(Tape<T>&, ModelParams<T>&, std::span<const Encoding>, Mode, std::uint64_t);   \
  template Var mlm_logits(Tape<T>&, ModelParams<T>&, std::span<const Encoding>,                       \
                          std::span<const std::vector<std::size_t>>, Mode, std::uint64_t);            \
  template EncodedBatch<T> encode_batch(const ModelParams<T>&, std::span<const Encoding>, Mode,        \
                                        std::uint64_t, bool);                                         \
  template Tensor<T> classify(const ModelParams<T>&, std::span<const Encoding>);                      \
  template Tensor<T> mlm_forward(const ModelParams<T>&, std::span<const Encoding>,                    \
                                 std::span<const std::vector<std::size_t>>);

ADTEXT_INSTANTIATE_ENCODER(float)
ADTEXT_INSTANTIATE_ENCODER(double)

}  // namespace adtext
