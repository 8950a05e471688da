#pragma once

// Central finite-difference verification of analytic gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "hoiprompt/tensor.hpp"
#include "hoiprompt/util.hpp"

namespace hoi {

/// Gradients whose norms both sit below this floor are compared absolutely;
/// exact zeros (e.g. key biases under softmax) would otherwise divide noise by noise.
inline constexpr double kNormFloor = 1e-5;

struct GradCheckResult {
  double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||, kNormFloor)
  double analytic_norm = 0.0;
  double numeric_norm = 0.0;
  std::size_t entries = 0;
  bool passed(double tol) const { return rel_error < tol; }
};

/// Compares a precomputed analytic gradient of `param` against central differences
/// on up to `max_entries` randomly sampled coordinates (all coordinates when 0).
/// `loss_fn` must rebuild the graph from the current parameter values.
template <typename S>
GradCheckResult gradcheck_against(const std::function<Tensor<S>()>& loss_fn, Tensor<S> param, const Matrix<S>& analytic,
                                  double step = 1e-5, std::size_t max_entries = 0, std::uint64_t seed = 1) {
  const std::size_t total = static_cast<std::size_t>(param.value().size());
  std::vector<std::size_t> coords(total);
  std::iota(coords.begin(), coords.end(), 0);
  if (max_entries != 0 && max_entries < total) {
    Rng rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng.engine());
    coords.resize(max_entries);
    std::sort(coords.begin(), coords.end());
  }

  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  S* data = param.mutable_value().data();
  for (std::size_t c : coords) {
    const S saved = data[c];
    data[c] = saved + static_cast<S>(step);
    const double up = static_cast<double>(loss_fn().item());
    data[c] = saved - static_cast<S>(step);
    const double down = static_cast<double>(loss_fn().item());
    data[c] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double a = static_cast<double>(analytic.data()[c]);
    diff2 += (a - numeric) * (a - numeric);
    a2 += a * a;
    n2 += numeric * numeric;
  }
  GradCheckResult r;
  r.entries = coords.size();
  r.analytic_norm = std::sqrt(a2);
  r.numeric_norm = std::sqrt(n2);
  r.rel_error = std::sqrt(diff2) / std::max({r.analytic_norm, r.numeric_norm, kNormFloor});
  return r;
}

/// Same, computing the analytic gradient with one backward pass first.
template <typename S>
GradCheckResult gradcheck(const std::function<Tensor<S>()>& loss_fn, Tensor<S> param, double step = 1e-5,
                          std::size_t max_entries = 0, std::uint64_t seed = 1) {
  param.zero_grad();
  loss_fn().backward();
  const Matrix<S> analytic = param.has_grad() ? param.grad() : Matrix<S>::Zero(param.rows(), param.cols());
  param.zero_grad();
  return gradcheck_against(loss_fn, param, analytic, step, max_entries, seed);
}

}  // namespace hoi
