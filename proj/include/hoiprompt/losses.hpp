#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "hoiprompt/ops.hpp"

namespace hoi {

inline constexpr double kFocalEps = 1e-7;

/// Binary focal loss averaged over every element:
/// -a (1-s)^g t log s - (1-a) s^g (1-t) log(1-s). Scores are clamped to
/// [eps, 1-eps]; clamped entries pass no gradient and are counted in `clamped`.
template <typename S>
Tensor<S> focal_loss(const Tensor<S>& scores, const Matrix<S>& targets, double gamma, double alpha, int* clamped = nullptr) {
  if (scores.rows() != targets.rows() || scores.cols() != targets.cols()) {
    throw DimensionError("focal_loss: scores " + shape_string(scores.rows(), scores.cols()) + " vs targets " +
                         shape_string(targets.rows(), targets.cols()));
  }
  const Index n = scores.value().size();
  if (n == 0) return Tensor<S>::scalar(0);
  const double lo = kFocalEps, hi = 1.0 - kFocalEps;
  Matrix<S> dloss(scores.rows(), scores.cols());
  double total = 0;
  int clamp_count = 0;
  for (Index k = 0; k < n; ++k) {
    const double raw = static_cast<double>(scores.value().data()[k]);
    const double s = std::clamp(raw, lo, hi);
    const bool was_clamped = s != raw;
    clamp_count += was_clamped;
    const double t = static_cast<double>(targets.data()[k]);
    double l = 0, g = 0;
    if (t > 0.5) {
      l = -alpha * std::pow(1 - s, gamma) * std::log(s);
      g = -alpha * (-gamma * std::pow(1 - s, gamma - 1) * std::log(s) + std::pow(1 - s, gamma) / s);
    } else {
      l = -(1 - alpha) * std::pow(s, gamma) * std::log(1 - s);
      g = -(1 - alpha) * (gamma * std::pow(s, gamma - 1) * std::log(1 - s) - std::pow(s, gamma) / (1 - s));
    }
    total += l;
    dloss.data()[k] = was_clamped ? S(0) : static_cast<S>(g / static_cast<double>(n));
  }
  if (clamped) *clamped += clamp_count;
  Matrix<S> value(1, 1);
  value(0, 0) = static_cast<S>(total / static_cast<double>(n));
  const S sign = fault_sign<S>("focal");
  return make_op<S>("focal", std::move(value), {scores}, [dloss = std::move(dloss), sign, p = scores.node()](Node<S>& self) {
    p->accumulate(dloss * (self.grad(0, 0) * sign));
  });
}

/// Off-diagonal row-softmax of X X^T; diagonal entries are 0.
template <typename S>
Matrix<S> offdiag_softmax(const Matrix<S>& x) {
  Matrix<S> sim = x * x.transpose();
  Matrix<S> out = Matrix<S>::Zero(sim.rows(), sim.cols());
  for (Index i = 0; i < sim.rows(); ++i) {
    S top = -std::numeric_limits<S>::infinity();
    for (Index j = 0; j < sim.cols(); ++j)
      if (j != i) top = std::max(top, sim(i, j));
    S z = 0;
    for (Index j = 0; j < sim.cols(); ++j)
      if (j != i) z += (out(i, j) = std::exp(sim(i, j) - top));
    if (z > 0) out.row(i) /= z;
  }
  return out;
}

/// Mean over rows of KL(target_i || prediction_i), where target rows are the
/// off-diagonal softmax of the description similarities and prediction rows
/// the off-diagonal softmax of the text-feature similarities. 0 for one class.
template <typename S>
Tensor<S> relation_loss(const Tensor<S>& text_features, const Matrix<S>& descriptions) {
  if (text_features.rows() != descriptions.rows()) {
    throw DimensionError("relation_loss: " + std::to_string(text_features.rows()) + " text rows vs " +
                         std::to_string(descriptions.rows()) + " description rows");
  }
  const Index c = text_features.rows();
  if (c < 2) return Tensor<S>::scalar(0);
  const Matrix<S> target = offdiag_softmax(descriptions);
  Matrix<S> log_target = Matrix<S>::Zero(c, c);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> keep(c, c);
  for (Index i = 0; i < c; ++i) {
    for (Index j = 0; j < c; ++j) {
      keep(i, j) = i != j;
      if (target(i, j) > 0) log_target(i, j) = std::log(target(i, j));
    }
  }
  Tensor<S> log_pred = masked_log_softmax_rows(matmul_nt(text_features, text_features), keep);
  Tensor<S> kl = sum(mul(Tensor<S>::constant(target), sub(Tensor<S>::constant(log_target), log_pred)));
  return scale(kl, static_cast<S>(1.0 / static_cast<double>(c)));
}

/// L_train = focal + alpha * relation.
template <typename S>
Tensor<S> total_loss(const Tensor<S>& focal, const Tensor<S>& relation, double alpha) {
  if (alpha < 0) throw ConfigError("relation weight must be >= 0");
  return add(focal, scale(relation, static_cast<S>(alpha)));
}

}  // namespace hoi
