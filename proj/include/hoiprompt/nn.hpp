#pragma once

// Parameter storage and the small set of layers shared by the encoders,
// guidance adapters and the interaction head.

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hoiprompt/ops.hpp"
#include "hoiprompt/util.hpp"

namespace hoi {

template <typename S>
struct Parameter {
  std::string name;
  std::string group;
  Tensor<S> tensor;
  bool trainable = false;
};

/// Owns every named parameter of a model. Trainable parameters are
/// requires_grad leaves; frozen ones are constants and never see gradients.
template <typename S>
class ParamStore {
 public:
  Tensor<S> add(const std::string& name, const std::string& group, Matrix<S> init, bool trainable) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    index_[name] = params_.size();
    params_.push_back({name, group, Tensor<S>::leaf(std::move(init), trainable), trainable});
    return params_.back().tensor;
  }

  std::vector<Parameter<S>>& params() { return params_; }
  const std::vector<Parameter<S>>& params() const { return params_; }

  const Parameter<S>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }
  Parameter<S>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  /// Checksum over names and values of the selected parameters, in insertion order.
  std::uint64_t checksum(bool trainable) const {
    Fnv1a h;
    for (const auto& p : params_) {
      if (p.trainable != trainable) continue;
      h.update(p.name);
      const auto& v = p.tensor.value();
      h.update(v.data(), sizeof(S) * static_cast<std::size_t>(v.size()));
    }
    return h.digest();
  }

  std::size_t count(bool trainable) const {
    std::size_t n = 0;
    for (const auto& p : params_)
      if (p.trainable == trainable) n += static_cast<std::size_t>(p.tensor.value().size());
    return n;
  }

 private:
  std::vector<Parameter<S>> params_;
  std::map<std::string, std::size_t> index_;
};

namespace init {

template <typename S>
Matrix<S> normal(Rng& rng, Index rows, Index cols, double stddev) {
  Matrix<S> m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = static_cast<S>(rng.normal(0.0, stddev));
  return m;
}

/// Glorot-style scale for an in x out projection.
template <typename S>
Matrix<S> fan_in(Rng& rng, Index in, Index out, double gain = 1.0) {
  return normal<S>(rng, in, out, gain / std::sqrt(static_cast<double>(in)));
}

template <typename S>
Matrix<S> zeros(Index rows, Index cols) {
  return Matrix<S>::Zero(rows, cols);
}

template <typename S>
Matrix<S> ones(Index rows, Index cols) {
  return Matrix<S>::Ones(rows, cols);
}

}  // namespace init

template <typename S>
struct Linear {
  Tensor<S> weight;  // in x out
  Tensor<S> bias;    // 1 x out, may be undefined

  Linear() = default;
  Linear(ParamStore<S>& store, const std::string& name, const std::string& group, Index in, Index out, Rng& rng,
         bool trainable, bool with_bias = true, double gain = 1.0) {
    weight = store.add(name + ".weight", group, init::fan_in<S>(rng, in, out, gain), trainable);
    if (with_bias) bias = store.add(name + ".bias", group, init::zeros<S>(1, out), trainable);
  }

  Tensor<S> operator()(const Tensor<S>& x) const {
    Tensor<S> y = matmul(x, weight);
    return bias.defined() ? add_bias(y, bias) : y;
  }
};

template <typename S>
struct LayerNorm {
  Tensor<S> gamma;
  Tensor<S> beta;

  LayerNorm() = default;
  LayerNorm(ParamStore<S>& store, const std::string& name, const std::string& group, Index width, bool trainable) {
    gamma = store.add(name + ".gamma", group, init::ones<S>(1, width), trainable);
    beta = store.add(name + ".beta", group, init::zeros<S>(1, width), trainable);
  }

  Tensor<S> operator()(const Tensor<S>& x) const { return layer_norm_rows(x, gamma, beta); }
};

/// Multi-head attention with input projections and a learned output projection.
template <typename S>
struct MultiHeadAttention {
  Linear<S> q_proj, k_proj, v_proj, out_proj;
  int heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore<S>& store, const std::string& name, const std::string& group, Index width,
                     int num_heads, Rng& rng, bool trainable)
      : heads(num_heads) {
    if (num_heads <= 0 || width % num_heads != 0) {
      throw ConfigError(name + ": width " + std::to_string(width) + " not divisible by " +
                        std::to_string(num_heads) + " heads");
    }
    q_proj = Linear<S>(store, name + ".q", group, width, width, rng, trainable);
    k_proj = Linear<S>(store, name + ".k", group, width, width, rng, trainable);
    v_proj = Linear<S>(store, name + ".v", group, width, width, rng, trainable);
    out_proj = Linear<S>(store, name + ".out", group, width, width, rng, trainable);
  }

  Tensor<S> operator()(const Tensor<S>& query, const Tensor<S>& context) const {
    return out_proj(attention_core(q_proj(query), k_proj(context), v_proj(context), heads));
  }
};

/// Pre-norm transformer block: x + MHSA(LN(x)), then x + MLP(LN(x)).
template <typename S>
struct TransformerLayer {
  LayerNorm<S> ln1, ln2;
  MultiHeadAttention<S> attn;
  Linear<S> fc1, fc2;

  TransformerLayer() = default;
  TransformerLayer(ParamStore<S>& store, const std::string& name, const std::string& group, Index width, int heads,
                   Index hidden, Rng& rng, bool trainable, double residual_gain) {
    ln1 = LayerNorm<S>(store, name + ".ln1", group, width, trainable);
    attn = MultiHeadAttention<S>(store, name + ".attn", group, width, heads, rng, trainable);
    ln2 = LayerNorm<S>(store, name + ".ln2", group, width, trainable);
    fc1 = Linear<S>(store, name + ".fc1", group, width, hidden, rng, trainable);
    fc2 = Linear<S>(store, name + ".fc2", group, hidden, width, rng, trainable, true, residual_gain);
    // keep the residual stream dominant in the frozen random core
    attn.out_proj.weight.mutable_value() *= static_cast<S>(residual_gain);
  }

  Tensor<S> operator()(const Tensor<S>& x) const {
    Tensor<S> h = ln1(x);
    Tensor<S> y = add(x, attn(h, h));
    return add(y, fc2(gelu(fc1(ln2(y)))));
  }
};

/// W_up * MHA(Q = W_down q; K, V = W_down ctx) + q, with W_up zero-initialized
/// so the block is an exact identity until it is trained.
template <typename S>
struct GuidanceAdapter {
  Tensor<S> down;  // width x bottleneck
  Tensor<S> up;    // bottleneck x width
  MultiHeadAttention<S> attn;

  GuidanceAdapter() = default;
  GuidanceAdapter(ParamStore<S>& store, const std::string& name, const std::string& group, Index width,
                  Index bottleneck, int heads, Rng& rng) {
    down = store.add(name + ".down", group, init::fan_in<S>(rng, width, bottleneck), true);
    attn = MultiHeadAttention<S>(store, name + ".attn", group, bottleneck, heads, rng, true);
    up = store.add(name + ".up", group, init::zeros<S>(bottleneck, width), true);
  }

  Tensor<S> operator()(const Tensor<S>& query, const Tensor<S>& context) const {
    Tensor<S> q = matmul(query, down);
    Tensor<S> kv = matmul(context, down);
    return add(matmul(attn(q, kv), up), query);
  }

  Tensor<S> self_attend(const Tensor<S>& x) const {
    Tensor<S> h = matmul(x, down);
    return add(matmul(attn(h, h), up), x);
  }
};

}  // namespace hoi
