#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>

#include "adtext/random.hpp"
#include "adtext/tensor.hpp"

namespace adtext {

struct Var {
  std::size_t id = 0;
};

// Reverse-mode tape. Every op appends a node holding its value and a
// backward rule; backward() replays the rules in reverse order. Parameter
// leaves alias Parameter::grad, so gradients accumulate in place.
template <typename T>
class Tape {
 public:
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor<T> value);
  Var param(Parameter<T>& p);
  // Read-only leaf: the value is referenced, no gradient is tracked.
  Var param(const Parameter<T>& p);

  const Tensor<T>& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  // Gradient buffer for v, zero-initialized on first access.
  Tensor<T>& grad(Var v);
  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule.
  void backward(Var loss);

  // For op implementations: records a node. `backward` runs only when the
  // node's gradient was touched and at least one input requires a gradient.
  Var push(const char* op, Tensor<T> value, std::initializer_list<Var> inputs,
           std::function<void(Tape&, Var)> backward);

 private:
  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    Tensor<T>* external_grad = nullptr;
    bool has_grad = false;
    bool requires_grad = false;
    std::function<void(Tape&, Var)> backward;
  };

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_nodes_;
};

// Plain kernels (no tape).
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> transpose(const Tensor<T>& a);
// Softmax along the last axis with max subtraction.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x);

// Differentiable ops. 2-D unless noted; rank > 2 inputs are read as
// rows() x cols().
template <typename T>
Var matmul(Tape<T>& tape, Var a, Var b);  // [m,k]·[k,n]
template <typename T>
Var matmul_bt(Tape<T>& tape, Var a, Var b);  // [m,k]·[n,k]ᵀ
template <typename T>
Var add(Tape<T>& tape, Var a, Var b);  // same shape
template <typename T>
Var add_bias(Tape<T>& tape, Var x, Var bias);  // bias [n] broadcast over rows
template <typename T>
Var mul(Tape<T>& tape, Var a, Var b);  // elementwise, same shape
template <typename T>
Var sum(Tape<T>& tape, Var x);  // -> [1]
template <typename T>
Var gelu(Tape<T>& tape, Var x);  // tanh approximation
template <typename T>
Var tanh(Tape<T>& tape, Var x);
template <typename T>
Var softmax(Tape<T>& tape, Var x);
template <typename T>
Var layer_norm(Tape<T>& tape, Var x, Var gain, Var bias, T eps);
// Rows of table [V,h] selected by indices -> [n,h].
template <typename T>
Var gather_rows(Tape<T>& tape, Var table, std::span<const std::size_t> indices);
// Inverted dropout; identity when rate == 0.
template <typename T>
Var dropout(Tape<T>& tape, Var x, double rate, Rng& rng);
// Mean over rows of -log softmax(logits)[label] -> [1].
template <typename T>
Var cross_entropy(Tape<T>& tape, Var logits, std::span<const int> labels);

inline constexpr double kAttentionMaskValue = -1e9;

// Multi-head scaled dot-product attention over q, k, v of shape
// [batch*seq, heads*head_dim]. key_mask has batch*seq entries; keys with
// mask 0 get kAttentionMaskValue added before the softmax. When `weights`
// is given it receives the attention weights as [batch, heads, seq, seq].
template <typename T>
Var attention(Tape<T>& tape, Var q, Var k, Var v, std::span<const int> key_mask, std::size_t batch,
              std::size_t seq, std::size_t heads, Tensor<T>* weights = nullptr);

}  // namespace adtext
