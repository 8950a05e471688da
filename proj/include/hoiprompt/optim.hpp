#pragma once

#include <cmath>
#include <vector>

#include "hoiprompt/nn.hpp"

namespace hoi {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// AdamW with decoupled weight decay. Parameters whose gradient was never
/// populated in a step are skipped entirely (moments and values untouched).
template <typename S>
class AdamW {
 public:
  struct Moments {
    Matrix<S> m;
    Matrix<S> v;
  };

  explicit AdamW(AdamWConfig config) : config_(config) {
    if (!(config.lr > 0)) throw ConfigError("AdamW: learning rate must be positive");
  }

  const AdamWConfig& config() const { return config_; }
  void set_lr(double lr) {
    if (!(lr > 0)) throw ConfigError("AdamW: learning rate must be positive");
    config_.lr = lr;
  }
  long step_count() const { return step_; }
  const std::vector<Moments>& moments() const { return moments_; }

  void step(ParamStore<S>& store) {
    auto& params = store.params();
    if (moments_.empty()) moments_.resize(params.size());
    if (moments_.size() != params.size()) throw DimensionError("AdamW: parameter set changed between steps");
    ++step_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      if (!p.trainable || !p.tensor.has_grad()) continue;
      Matrix<S>& value = p.tensor.mutable_value();
      const Matrix<S>& g = p.tensor.grad();
      if (g.rows() != value.rows() || g.cols() != value.cols()) {
        throw DimensionError("AdamW: gradient shape " + shape_string(g.rows(), g.cols()) + " for parameter " +
                             p.name + " " + shape_string(value.rows(), value.cols()));
      }
      auto& mo = moments_[i];
      if (mo.m.size() == 0) {
        mo.m = Matrix<S>::Zero(value.rows(), value.cols());
        mo.v = Matrix<S>::Zero(value.rows(), value.cols());
      }
      const S b1 = static_cast<S>(config_.beta1);
      const S b2 = static_cast<S>(config_.beta2);
      mo.m = b1 * mo.m + (S(1) - b1) * g;
      mo.v = b2 * mo.v + (S(1) - b2) * g.cwiseProduct(g);
      if (config_.weight_decay != 0.0) value *= static_cast<S>(1.0 - config_.lr * config_.weight_decay);
      const S lr = static_cast<S>(config_.lr);
      const S eps = static_cast<S>(config_.eps);
      value.array() -= lr * (mo.m.array() / static_cast<S>(bc1)) /
                       ((mo.v.array() / static_cast<S>(bc2)).sqrt() + eps);
    }
  }

 private:
  AdamWConfig config_;
  long step_ = 0;
  std::vector<Moments> moments_;
};

}  // namespace hoi
