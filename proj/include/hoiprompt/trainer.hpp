#pragma once

// Training loop and inference for the interaction model.

#include <vector>

#include "hoiprompt/eval.hpp"
#include "hoiprompt/losses.hpp"
#include "hoiprompt/model.hpp"
#include "hoiprompt/optim.hpp"

namespace hoi {

/// q x V multi-label verb targets. A pair is positive for verb v when a GT
/// interaction with verb v has IoU >= 0.5 on both boxes and the detected
/// object category equals the GT object. Throws ContractError if the matched
/// interaction belongs to an unseen class.
Matrix<double> pair_targets(const Scene& scene, const std::vector<PairCandidate>& pairs, const World& world,
                            const SplitSpec& split);

struct LossParts {
  double total = 0, focal = 0, relation = 0;
  int clamped = 0;
};

/// L_train over a batch of prepared scenes: text features are computed once,
/// all pairs of the batch share one focal mean.
template <typename S>
Tensor<S> batch_loss(const HoiModel<S>& model, const std::vector<const SceneInputs<S>*>& scenes,
                     const std::vector<const Matrix<S>*>& targets, LossParts* parts = nullptr);

/// The same loss from already computed text features and per-scene pair features
/// (undefined for scenes without pairs).
template <typename S>
Tensor<S> batch_loss_from(const HoiModel<S>& model, const Tensor<S>& text, const std::vector<Tensor<S>>& pair_feats,
                          const std::vector<const SceneInputs<S>*>& scenes, const std::vector<const Matrix<S>*>& targets,
                          LossParts* parts = nullptr);

struct StepRecord {
  int epoch = 0, step = 0;
  LossParts loss;
};

template <typename S>
class Trainer {
 public:
  /// Prepares every training scene of the split (scenes with unseen interactions are excluded).
  Trainer(HoiModel<S>& model, const World& world, const SplitSpec& split);

  /// One pass over the shuffled training scenes; epoch numbers start at 1.
  LossParts train_epoch(int epoch);

  const std::vector<StepRecord>& history() const { return history_; }
  AdamW<S>& optimizer() { return optimizer_; }
  std::size_t scene_count() const { return inputs_.size(); }
  const SceneInputs<S>& inputs(std::size_t i) const { return inputs_[i]; }
  const Matrix<S>& targets(std::size_t i) const { return targets_[i]; }

 private:
  HoiModel<S>& model_;
  AdamW<S> optimizer_;
  std::vector<SceneInputs<S>> inputs_;
  std::vector<Matrix<S>> targets_;
  std::vector<StepRecord> history_;
  long steps_ = 0;
};

/// Scores every (pair, class) with tau and returns predictions for the scenes.
template <typename S>
std::vector<Prediction> predict(const HoiModel<S>& model, const std::vector<const Scene*>& scenes, double tau);

extern template class Trainer<float>;
extern template class Trainer<double>;

}  // namespace hoi
