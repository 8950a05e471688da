#pragma once

// Differentiable primitives. Shapes are strict: the only implicit broadcast
// is a 1xn row applied to every row (add_bias).

#include <vector>

#include "hoiprompt/tensor.hpp"

namespace hoi {

template <typename S> Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b);
/// a * b^T
template <typename S> Tensor<S> matmul_nt(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> transpose(const Tensor<S>& a);

template <typename S> Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> scale(const Tensor<S>& a, S factor);
/// a * s where s is a 1x1 tensor.
template <typename S> Tensor<S> scale_by(const Tensor<S>& a, const Tensor<S>& s);
/// Adds a 1xn row to every row of a.
template <typename S> Tensor<S> add_bias(const Tensor<S>& a, const Tensor<S>& bias);
/// Multiplies row i of a by weights(i); weights are constant.
template <typename S> Tensor<S> scale_rows(const Tensor<S>& a, const RowVector<S>& weights);

template <typename S> Tensor<S> concat_rows(const std::vector<Tensor<S>>& parts);
template <typename S> Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts);
template <typename S> Tensor<S> slice_rows(const Tensor<S>& a, Index start, Index count);
template <typename S> Tensor<S> slice_cols(const Tensor<S>& a, Index start, Index count);

/// Row-wise softmax with max subtraction.
template <typename S> Tensor<S> softmax_rows(const Tensor<S>& a);
template <typename S> Tensor<S> log_softmax_rows(const Tensor<S>& a);
/// Row-wise log-softmax over entries where keep(i,j) is true; dropped entries read 0 and get no gradient.
template <typename S>
Tensor<S> masked_log_softmax_rows(const Tensor<S>& a, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& keep);

template <typename S> Tensor<S> layer_norm_rows(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta);
/// Divides every row by its L2 norm (norm floored at 1e-12).
template <typename S> Tensor<S> l2_normalize_rows(const Tensor<S>& a);

template <typename S> Tensor<S> gelu(const Tensor<S>& a);
template <typename S> Tensor<S> relu(const Tensor<S>& a);
template <typename S> Tensor<S> sigmoid(const Tensor<S>& a);
template <typename S> Tensor<S> log(const Tensor<S>& a);
template <typename S> Tensor<S> exp(const Tensor<S>& a);
template <typename S> Tensor<S> square(const Tensor<S>& a);

template <typename S> Tensor<S> sum(const Tensor<S>& a);
template <typename S> Tensor<S> mean(const Tensor<S>& a);

/// Per-head scaled dot-product attention on already projected q (n x d), k, v (m x d).
/// Heads split the column dimension; outputs are concatenated back to n x d.
template <typename S>
Tensor<S> attention_core(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v, int heads);

template <typename S> Tensor<S> operator+(const Tensor<S>& a, const Tensor<S>& b) { return add(a, b); }
template <typename S> Tensor<S> operator-(const Tensor<S>& a, const Tensor<S>& b) { return sub(a, b); }

}  // namespace hoi
