#pragma once

// The trainable interaction model around a shared frozen encoder.

#include <map>
#include <memory>
#include <vector>

#include "hoiprompt/config.hpp"
#include "hoiprompt/encoders.hpp"
#include "hoiprompt/head.hpp"
#include "hoiprompt/prompts.hpp"
#include "hoiprompt/split.hpp"

namespace hoi {

/// Everything about a scene that does not depend on trainable state.
template <typename S>
struct SceneInputs {
  const Scene* scene = nullptr;
  Matrix<S> patches;
  Tensor<S> frozen_features;  // f_vis, D x d_v (only when image guidance is on)
  std::vector<PairCandidate> pairs;
  AdapterContext<S> adapter;
  Matrix<S> roi_human, roi_object, roi_union;  // q x D
};

/// Parameter groups in reporting order.
const std::vector<std::string>& trainable_groups();

template <typename S>
class HoiModel {
 public:
  HoiModel(const RunConfig& config, std::shared_ptr<const FrozenEncoders<S>> encoders, const World& world,
           const SplitSpec& split, const GuidanceEmbeddings& guidance);

  ParamStore<S>& params() { return params_; }
  const ParamStore<S>& params() const { return params_; }
  const FrozenEncoders<S>& encoders() const { return *encoders_; }
  const PromptBank<S>& bank() const { return bank_; }
  const InterFusion<S>& inter() const { return inter_; }
  const RunConfig& config() const { return config_; }
  const SelectedClassSet& selected() const { return selected_; }
  const Matrix<S>& selected_align() const { return align_; }
  const Matrix<S>& selected_descriptions() const { return selected_descriptions_; }
  const GuidanceTensors<S>& guidance() const { return guidance_; }
  const SplitSpec& split() const { return split_; }
  const World& world() const { return *world_; }
  Tensor<S> logit_scale() const { return logit_scale_; }

  /// Per-layer text prompts of one class after guidance and refinement.
  std::vector<Tensor<S>> class_prompts(int hoi) const;
  /// Per-layer prompts for several classes, sharing intermediate results.
  std::vector<std::vector<Tensor<S>>> class_prompts(const std::vector<int>& classes) const;
  /// W_t rows for the given classes (C x d_a).
  Tensor<S> text_features(const std::vector<int>& classes) const;

  /// Per-layer visual prompts for an image (guided when enabled).
  std::vector<Tensor<S>> visual_prompts(const SceneInputs<S>& inputs) const;

  SceneInputs<S> prepare(const Scene& scene) const;
  /// E_v of the prompted, adapted encoder (D x d_a).
  Tensor<S> visual_grid(const SceneInputs<S>& inputs) const;
  /// Fused pair features (q x d_a); undefined when the scene has no pairs.
  Tensor<S> pair_features(const SceneInputs<S>& inputs) const;

 private:
  RunConfig config_;
  std::shared_ptr<const FrozenEncoders<S>> encoders_;
  const World* world_;
  SplitSpec split_;
  GuidanceTensors<S> guidance_;
  SelectedClassSet selected_;
  Matrix<S> align_;
  Matrix<S> selected_descriptions_;

  ParamStore<S> params_;
  PromptBank<S> bank_;
  VisualAdapters<S> adapters_;
  IntraFusion<S> intra_;
  InterFusion<S> inter_;
  Tensor<S> logit_scale_;
};

extern template class HoiModel<float>;
extern template class HoiModel<double>;

}  // namespace hoi
