#include "adtext/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace adtext {

namespace {

// c[m,n] += a[m,k] · b[k,n]
template <typename T>
void gemm_acc(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[k,n] += a[m,k]ᵀ · b[m,n]
template <typename T>
void gemm_tn_acc(std::size_t m, std::size_t k, std::size_t n, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    const T* brow = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      T* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void transpose_into(std::size_t rows, std::size_t cols, const T* src, T* dst) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
  }
}

template <typename T>
void require_matrix(const Tensor<T>& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + " expects a matrix, got shape " + shape_string(t.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <typename T>
void softmax_row(T* row, std::size_t n) {
  T mx = -std::numeric_limits<T>::infinity();
  for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, row[j]);
  T total = 0;
  for (std::size_t j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - mx);
    total += row[j];
  }
  const T inv = T(1) / total;
  for (std::size_t j = 0; j < n; ++j) row[j] *= inv;
}

}  // namespace

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::param(Parameter<T>& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{it->second};
  if (p.grad.shape() != p.value.shape()) {
    throw ShapeError("parameter " + p.name + " has gradient shape " + shape_string(p.grad.shape()) +
                     " for value " + shape_string(p.value.shape()));
  }
  Node n;
  n.external = &p.value;
  n.external_grad = &p.grad;
  n.requires_grad = record_;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::param(const Parameter<T>& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var{it->second};
  Node n;
  n.external = &p.value;
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(&p, nodes_.size() - 1);
  return Var{nodes_.size() - 1};
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
  const Node& n = nodes_.at(v.id);
  return n.external ? *n.external : n.value;
}

template <typename T>
Tensor<T>& Tape<T>::grad(Var v) {
  Node& n = nodes_.at(v.id);
  if (n.external_grad) return *n.external_grad;
  if (!n.has_grad) {
    n.grad = Tensor<T>(value(v).shape());
    n.has_grad = true;
  }
  return n.grad;
}

template <typename T>
Var Tape<T>::push(const char* op, Tensor<T> value, std::initializer_list<Var> inputs,
                  std::function<void(Tape&, Var)> backward) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (Var in : inputs) n.requires_grad = n.requires_grad || nodes_.at(in.id).requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
void Tape<T>::backward(Var loss) {
  if (!record_) throw ConfigError("backward() on a tape that does not record");
  if (value(loss).size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " + shape_string(value(loss).shape()));
  }
  grad(loss)[0] += T(1);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.has_grad && n.backward) n.backward(*this, Var{i});
  }
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: inner dimensions differ, " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  }
  Tensor<T> c({a.dim(0), b.dim(1)});
  gemm_acc(a.dim(0), a.dim(1), b.dim(1), a.data(), b.data(), c.data());
  return c;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_matrix(a, "transpose");
  Tensor<T> t({a.dim(1), a.dim(0)});
  transpose_into(a.dim(0), a.dim(1), a.data(), t.data());
  return t;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
  Tensor<T> y = x;
  const std::size_t n = y.cols();
  for (std::size_t r = 0; r < y.rows(); ++r) softmax_row(y.data() + r * n, n);
  return y;
}

template <typename T>
Var matmul(Tape<T>& tape, Var a, Var b) {
  Tensor<T> out = matmul(tape.value(a), tape.value(b));
  return tape.push("matmul", std::move(out), {a, b}, [a, b](Tape<T>& t, Var self) {
    const Tensor<T>& av = t.value(a);
    const Tensor<T>& bv = t.value(b);
    const Tensor<T>& dc = t.grad(self);
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    if (t.requires_grad(a)) {
      const Tensor<T> bt = transpose(bv);
      gemm_acc(m, n, k, dc.data(), bt.data(), t.grad(a).data());
    }
    if (t.requires_grad(b)) gemm_tn_acc(m, k, n, av.data(), dc.data(), t.grad(b).data());
  });
}

template <typename T>
Var matmul_bt(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  require_matrix(av, "matmul_bt");
  require_matrix(bv, "matmul_bt");
  if (av.dim(1) != bv.dim(1)) {
    throw ShapeError("matmul_bt: inner dimensions differ, " + shape_string(av.shape()) + " x " +
                     shape_string(bv.shape()) + "ᵀ");
  }
  Tensor<T> out = matmul(av, transpose(bv));
  return tape.push("matmul_bt", std::move(out), {a, b}, [a, b](Tape<T>& t, Var self) {
    const Tensor<T>& av = t.value(a);
    const Tensor<T>& bv = t.value(b);
    const Tensor<T>& dc = t.grad(self);
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(0);
    if (t.requires_grad(a)) gemm_acc(m, n, k, dc.data(), bv.data(), t.grad(a).data());
    if (t.requires_grad(b)) gemm_tn_acc(m, n, k, dc.data(), av.data(), t.grad(b).data());
  });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape.value(a), tape.value(b), "add");
  Tensor<T> out = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.push("add", std::move(out), {a, b}, [a, b](Tape<T>& t, Var self) {
    const Tensor<T>& g = t.grad(self);
    for (Var in : {a, b}) {
      if (!t.requires_grad(in)) continue;
      Tensor<T>& gi = t.grad(in);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

template <typename T>
Var add_bias(Tape<T>& tape, Var x, Var bias) {
  const Tensor<T>& bv = tape.value(bias);
  Tensor<T> out = tape.value(x);
  const std::size_t n = out.cols();
  if (bv.size() != n) {
    throw ShapeError("add_bias: bias " + shape_string(bv.shape()) + " does not match rows of " +
                     shape_string(out.shape()));
  }
  for (std::size_t r = 0; r < out.rows(); ++r) {
    T* row = out.data() + r * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += bv[j];
  }
  return tape.push("add_bias", std::move(out), {x, bias}, [x, bias](Tape<T>& t, Var self) {
    const Tensor<T>& g = t.grad(self);
    if (t.requires_grad(x)) {
      Tensor<T>& gx = t.grad(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (t.requires_grad(bias)) {
      Tensor<T>& gb = t.grad(bias);
      const std::size_t n = g.cols();
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const T* row = g.data() + r * n;
        for (std::size_t j = 0; j < n; ++j) gb[j] += row[j];
      }
    }
  });
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape.value(a), tape.value(b), "mul");
  Tensor<T> out = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.push("mul", std::move(out), {a, b}, [a, b](Tape<T>& t, Var self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& av = t.value(a);
    const Tensor<T>& bv = t.value(b);
    if (t.requires_grad(a)) {
      Tensor<T>& ga = t.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      Tensor<T>& gb = t.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

template <typename T>
Var sum(Tape<T>& tape, Var x) {
  T total = 0;
  for (T v : tape.value(x).values()) total += v;
  return tape.push("sum", Tensor<T>({1}, total), {x}, [x](Tape<T>& t, Var self) {
    if (!t.requires_grad(x)) return;
    const T g = t.grad(self)[0];
    for (T& gi : t.grad(x).values()) gi += g;
  });
}

template <typename T>
Var gelu(Tape<T>& tape, Var x) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T kA = T(0.044715);
  Tensor<T> out = tape.value(x);
  for (T& v : out.values()) {
    const T u = kC * (v + kA * v * v * v);
    v = T(0.5) * v * (T(1) + std::tanh(u));
  }
  return tape.push("gelu", std::move(out), {x}, [x](Tape<T>& t, Var self) {
    if (!t.requires_grad(x)) return;
    const Tensor<T>& xv = t.value(x);
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T v = xv[i];
      const T th = std::tanh(kC * (v + kA * v * v * v));
      const T d = T(0.5) * (T(1) + th) + T(0.5) * v * (T(1) - th * th) * kC * (T(1) + T(3) * kA * v * v);
      gx[i] += g[i] * d;
    }
  });
}

template <typename T>
Var tanh(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  for (T& v : out.values()) v = std::tanh(v);
  return tape.push("tanh", std::move(out), {x}, [x](Tape<T>& t, Var self) {
    if (!t.requires_grad(x)) return;
    const Tensor<T>& y = t.value(self);
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (T(1) - y[i] * y[i]);
  });
}

template <typename T>
Var softmax(Tape<T>& tape, Var x) {
  return tape.push("softmax", softmax(tape.value(x)), {x}, [x](Tape<T>& t, Var self) {
    if (!t.requires_grad(x)) return;
    const Tensor<T>& y = t.value(self);
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& gx = t.grad(x);
    const std::size_t n = y.cols();
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const T* yr = y.data() + r * n;
      const T* gr = g.data() + r * n;
      T dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += yr[j] * gr[j];
      T* out = gx.data() + r * n;
      for (std::size_t j = 0; j < n; ++j) out[j] += yr[j] * (gr[j] - dot);
    }
  });
}

template <typename T>
Var layer_norm(Tape<T>& tape, Var x, Var gain, Var bias, T eps) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& gv = tape.value(gain);
  const Tensor<T>& bv = tape.value(bias);
  const std::size_t h = xv.cols();
  if (h == 0 || gv.size() != h || bv.size() != h) {
    throw ShapeError("layer_norm: gain " + shape_string(gv.shape()) + " / bias " +
                     shape_string(bv.shape()) + " do not match " + shape_string(xv.shape()));
  }
  const std::size_t rows = xv.rows();
  Tensor<T> out(xv.shape());
  std::vector<T> xhat(xv.size());
  std::vector<T> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xv.data() + r * h;
    T mean = 0;
    for (std::size_t j = 0; j < h; ++j) mean += xr[j];
    mean /= T(h);
    T var = 0;
    for (std::size_t j = 0; j < h; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= T(h);
    rstd[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < h; ++j) {
      const T xh = (xr[j] - mean) * rstd[r];
      xhat[r * h + j] = xh;
      out[r * h + j] = xh * gv[j] + bv[j];
    }
  }
  return tape.push(
      "layer_norm", std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), rstd = std::move(rstd), h](Tape<T>& t, Var self) {
        const Tensor<T>& g = t.grad(self);
        const Tensor<T>& gv = t.value(gain);
        const std::size_t rows = rstd.size();
        if (t.requires_grad(gain)) {
          Tensor<T>& gg = t.grad(gain);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < h; ++j) gg[j] += g[r * h + j] * xhat[r * h + j];
          }
        }
        if (t.requires_grad(bias)) {
          Tensor<T>& gb = t.grad(bias);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < h; ++j) gb[j] += g[r * h + j];
          }
        }
        if (t.requires_grad(x)) {
          Tensor<T>& gx = t.grad(x);
          for (std::size_t r = 0; r < rows; ++r) {
            T mean_d = 0;
            T mean_dx = 0;
            for (std::size_t j = 0; j < h; ++j) {
              const T d = g[r * h + j] * gv[j];
              mean_d += d;
              mean_dx += d * xhat[r * h + j];
            }
            mean_d /= T(h);
            mean_dx /= T(h);
            for (std::size_t j = 0; j < h; ++j) {
              const T d = g[r * h + j] * gv[j];
              gx[r * h + j] += rstd[r] * (d - mean_d - xhat[r * h + j] * mean_dx);
            }
          }
        }
      });
}

template <typename T>
Var gather_rows(Tape<T>& tape, Var table, std::span<const std::size_t> indices) {
  const Tensor<T>& tv = tape.value(table);
  require_matrix(tv, "gather_rows");
  const std::size_t h = tv.dim(1);
  Tensor<T> out({indices.size(), h});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= tv.dim(0)) {
      throw ShapeError("gather_rows: index " + std::to_string(indices[i]) + " out of range for " +
                       shape_string(tv.shape()));
    }
    std::copy_n(tv.data() + indices[i] * h, h, out.data() + i * h);
  }
  return tape.push("gather_rows", std::move(out), {table},
                   [table, idx = std::vector<std::size_t>(indices.begin(), indices.end()), h](
                       Tape<T>& t, Var self) {
                     if (!t.requires_grad(table)) return;
                     const Tensor<T>& g = t.grad(self);
                     Tensor<T>& gt = t.grad(table);
                     for (std::size_t i = 0; i < idx.size(); ++i) {
                       T* dst = gt.data() + idx[i] * h;
                       const T* src = g.data() + i * h;
                       for (std::size_t j = 0; j < h; ++j) dst[j] += src[j];
                     }
                   });
}

template <typename T>
Var dropout(Tape<T>& tape, Var x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  const T scale = T(1.0 / (1.0 - rate));
  Tensor<T> out = tape.value(x);
  std::vector<T> mask(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < rate ? T(0) : scale;
    out[i] *= mask[i];
  }
  return tape.push("dropout", std::move(out), {x}, [x, mask = std::move(mask)](Tape<T>& t, Var self) {
    if (!t.requires_grad(x)) return;
    const Tensor<T>& g = t.grad(self);
    Tensor<T>& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
}

template <typename T>
Var cross_entropy(Tape<T>& tape, Var logits, std::span<const int> labels) {
  const Tensor<T>& lv = tape.value(logits);
  require_matrix(lv, "cross_entropy");
  const std::size_t b = lv.dim(0), c = lv.dim(1);
  if (labels.size() != b) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(b) + " rows");
  }
  if (b == 0) throw ShapeError("cross_entropy: empty batch");
  Tensor<T> probs = softmax(lv);
  T loss = 0;
  for (std::size_t r = 0; r < b; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= c) {
      throw InputError("cross_entropy: label " + std::to_string(labels[r]) + " outside [0, " +
                       std::to_string(c) + ")");
    }
    // log-softmax directly from logits keeps tiny probabilities exact.
    const T* row = lv.data() + r * c;
    const T mx = *std::max_element(row, row + c);
    T total = 0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(row[j] - mx);
    loss += -(row[labels[r]] - mx - std::log(total));
  }
  loss /= T(b);
  return tape.push("cross_entropy", Tensor<T>({1}, loss), {logits},
                   [logits, probs = std::move(probs),
                    lab = std::vector<int>(labels.begin(), labels.end())](Tape<T>& t, Var self) {
                     if (!t.requires_grad(logits)) return;
                     const T g = t.grad(self)[0];
                     Tensor<T>& gl = t.grad(logits);
                     const std::size_t b = probs.dim(0), c = probs.dim(1);
                     const T scale = g / T(b);
                     for (std::size_t r = 0; r < b; ++r) {
                       for (std::size_t j = 0; j < c; ++j) {
                         const T onehot = static_cast<int>(j) == lab[r] ? T(1) : T(0);
                         gl[r * c + j] += scale * (probs[r * c + j] - onehot);
                       }
                     }
                   });
}

template <typename T>
Var attention(Tape<T>& tape, Var q, Var k, Var v, std::span<const int> key_mask, std::size_t batch,
              std::size_t seq, std::size_t heads, Tensor<T>* weights) {
  const Tensor<T>& qv = tape.value(q);
  const Tensor<T>& kv = tape.value(k);
  const Tensor<T>& vv = tape.value(v);
  require_same_shape(qv, kv, "attention");
  require_same_shape(qv, vv, "attention");
  require_matrix(qv, "attention");
  const std::size_t d = qv.dim(1);
  if (qv.dim(0) != batch * seq || key_mask.size() != batch * seq || heads == 0 || d % heads != 0) {
    throw ShapeError("attention: inputs " + shape_string(qv.shape()) + " with mask of " +
                     std::to_string(key_mask.size()) + " do not fit batch " + std::to_string(batch) +
                     ", seq " + std::to_string(seq) + ", heads " + std::to_string(heads));
  }
  const std::size_t dh = d / heads;
  const T scale = T(1) / std::sqrt(T(dh));
  const T masked = T(kAttentionMaskValue);

  Tensor<T> probs({batch, heads, seq, seq});
  Tensor<T> out({batch * seq, d});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < seq; ++i) {
        T* p = probs.data() + ((b * heads + h) * seq + i) * seq;
        const T* qi = qv.data() + (b * seq + i) * d + h * dh;
        for (std::size_t j = 0; j < seq; ++j) {
          const T* kj = kv.data() + (b * seq + j) * d + h * dh;
          T s = 0;
          for (std::size_t e = 0; e < dh; ++e) s += qi[e] * kj[e];
          p[j] = s * scale + (key_mask[b * seq + j] ? T(0) : masked);
        }
        softmax_row(p, seq);
        T* oi = out.data() + (b * seq + i) * d + h * dh;
        for (std::size_t j = 0; j < seq; ++j) {
          const T pj = p[j];
          if (pj == T(0)) continue;
          const T* vj = vv.data() + (b * seq + j) * d + h * dh;
          for (std::size_t e = 0; e < dh; ++e) oi[e] += pj * vj[e];
        }
      }
    }
  }
  if (weights) *weights = probs;

  return tape.push(
      "attention", std::move(out), {q, k, v},
      [q, k, v, probs = std::move(probs), batch, seq, heads, dh, d, scale](Tape<T>& t, Var self) {
        const Tensor<T>& qv = t.value(q);
        const Tensor<T>& kv = t.value(k);
        const Tensor<T>& vv = t.value(v);
        const Tensor<T>& g = t.grad(self);
        T* gq = t.requires_grad(q) ? t.grad(q).data() : nullptr;
        T* gk = t.requires_grad(k) ? t.grad(k).data() : nullptr;
        T* gv = t.requires_grad(v) ? t.grad(v).data() : nullptr;
        std::vector<T> dp(seq);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            for (std::size_t i = 0; i < seq; ++i) {
              const T* p = probs.data() + ((b * heads + h) * seq + i) * seq;
              const T* gi = g.data() + (b * seq + i) * d + h * dh;
              T weighted = 0;
              for (std::size_t j = 0; j < seq; ++j) {
                const T* vj = vv.data() + (b * seq + j) * d + h * dh;
                T s = 0;
                for (std::size_t e = 0; e < dh; ++e) s += gi[e] * vj[e];
                dp[j] = s;
                weighted += p[j] * s;
                if (gv && p[j] != T(0)) {
                  T* gvj = gv + (b * seq + j) * d + h * dh;
                  for (std::size_t e = 0; e < dh; ++e) gvj[e] += p[j] * gi[e];
                }
              }
              const T* qi = qv.data() + (b * seq + i) * d + h * dh;
              T* gqi = gq ? gq + (b * seq + i) * d + h * dh : nullptr;
              for (std::size_t j = 0; j < seq; ++j) {
                const T ds = p[j] * (dp[j] - weighted) * scale;
                if (ds == T(0)) continue;
                const T* kj = kv.data() + (b * seq + j) * d + h * dh;
                if (gqi) {
                  for (std::size_t e = 0; e < dh; ++e) gqi[e] += ds * kj[e];
                }
                if (gk) {
                  T* gkj = gk + (b * seq + j) * d + h * dh;
                  for (std::size_t e = 0; e < dh; ++e) gkj[e] += ds * qi[e];
                }
              }
            }
          }
        }
      });
}

#define ADTEXT_INSTANTIATE(T)                                                                   \
  template class Tape<T>;                                                                       \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> transpose(const Tensor<T>&);                                               \
  template Tensor<T> softmax(const Tensor<T>&);                                                 \
  template Var matmul(Tape<T>&, Var, Var);                                                      \
  template Var matmul_bt(Tape<T>&, Var, Var);                                                   \
  template Var add(Tape<T>&, Var, Var);                                                         \
  template Var add_bias(Tape<T>&, Var, Var);                                                    \
  template Var mul(Tape<T>&, Var, Var);                                                         \
  template Var sum(Tape<T>&, Var);                                                              \
  template Var gelu(Tape<T>&, Var);                                                             \
  template Var tanh(Tape<T>&, Var);                                                             \
  template Var softmax(Tape<T>&, Var);                                                          \
  template Var layer_norm(Tape<T>&, Var, Var, Var, T);                                          \
  template Var gather_rows(Tape<T>&, Var, std::span<const std::size_t>);                        \
  template Var dropout(Tape<T>&, Var, double, Rng&);                                            \
  template Var cross_entropy(Tape<T>&, Var, std::span<const int>);                              \
  template Var attention(Tape<T>&, Var, Var, Var, std::span<const int>, std::size_t, std::size_t, \
                         std::size_t, Tensor<T>*);

ADTEXT_INSTANTIATE(float)
ADTEXT_INSTANTIATE(double)

}  // namespace adtext
