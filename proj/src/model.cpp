#include "hoiprompt/model.hpp"

namespace hoi {

const std::vector<std::string>& trainable_groups() {
  static const std::vector<std::string> groups = {"prompt",       "proj",         "llm_guide",    "vlm_guide", "utpl",
                                                  "visual_adapter", "intra_fusion", "inter_fusion", "logit_scale"};
  return groups;
}

template <typename S>
HoiModel<S>::HoiModel(const RunConfig& config, std::shared_ptr<const FrozenEncoders<S>> encoders, const World& world,
                      const SplitSpec& split, const GuidanceEmbeddings& guidance)
    : config_(config), encoders_(std::move(encoders)), world_(&world), split_(split), guidance_(guidance) {
  config.validate();
  const EncoderDims& dims = encoders_->dims();
  if (!(dims == encoder_dims(config))) throw ConfigError("frozen encoder dimensions do not match the run configuration");
  if (guidance.classes() != static_cast<int>(world.classes.size())) {
    throw DatasetError("guidance has " + std::to_string(guidance.classes()) + " classes, world has " +
                       std::to_string(world.classes.size()));
  }
  if (guidance.width() != config.d_t) {
    throw DatasetError("guidance width " + std::to_string(guidance.width()) + " differs from d_t " + std::to_string(config.d_t));
  }
  if (config.toggles.utpl) {
    for (int u : split.unseen) {
      if (guidance.disparities[static_cast<std::size_t>(u)].rows() == 0 || guidance.related_seen[static_cast<std::size_t>(u)] < 0) {
        throw DatasetError("missing disparity embedding for unseen class " + std::to_string(u));
      }
    }
  }

  selected_ = select_hoi_pairs_per_action(guidance.descriptions, world.classes, world.config.n_verbs);
  align_ = selected_.align.cast<S>();
  selected_descriptions_.resize(static_cast<Index>(selected_.classes.size()), config.d_t);
  for (std::size_t k = 0; k < selected_.classes.size(); ++k)
    selected_descriptions_.row(static_cast<Index>(k)) = guidance.descriptions.row(selected_.classes[k]).template cast<S>();

  Rng rng = Rng(config.seed).derive("model");
  bank_ = PromptBank<S>(params_, PromptShape{config.prompt_depth, config.prompt_tokens, config.d_v, config.d_t}, rng);
  adapters_ = VisualAdapters<S>(params_, config.layers, config.d_v, config.adapter_rank, config.world.n_objects + 1, rng);
  intra_ = IntraFusion<S>(params_, config.d_a, config.intra_hidden, rng);
  inter_ = InterFusion<S>(params_, config.d_a, config.inter_heads, rng);
  logit_scale_ = params_.add("logit_scale", "logit_scale", Matrix<S>::Constant(1, 1, static_cast<S>(config.logit_scale)), true);
}

template <typename S>
std::vector<std::vector<Tensor<S>>> HoiModel<S>::class_prompts(const std::vector<int>& classes) const {
  const int depth = bank_.depth();
  const std::vector<Tensor<S>> base = bank_.base_text();
  std::map<int, std::vector<Tensor<S>>> guided;
  auto guided_prompts = [&](int c) -> const std::vector<Tensor<S>>& {
    auto it = guided.find(c);
    if (it != guided.end()) return it->second;
    std::vector<Tensor<S>> out = base;
    if (config_.toggles.llm_guide) {
      for (int i = 0; i < depth; ++i)
        out[static_cast<std::size_t>(i)] = bank_.llm_guide(i, base[static_cast<std::size_t>(i)], guidance_.descriptions[static_cast<std::size_t>(c)]);
    }
    return guided.emplace(c, std::move(out)).first->second;
  };

  std::vector<std::vector<Tensor<S>>> result;
  result.reserve(classes.size());
  for (int c : classes) {
    std::vector<Tensor<S>> prompts = guided_prompts(c);
    if (config_.toggles.utpl && split_.is_unseen(c)) {
      const int s = guidance_.related_seen[static_cast<std::size_t>(c)];
      const std::vector<Tensor<S>> related = guided_prompts(s);
      for (int i = 0; i < depth; ++i) {
        const auto k = static_cast<std::size_t>(i);
        prompts[k] = bank_.utpl_refine(i, prompts[k], related[k], guidance_.disparities[static_cast<std::size_t>(c)]);
      }
    }
    result.push_back(std::move(prompts));
  }
  return result;
}

template <typename S>
std::vector<Tensor<S>> HoiModel<S>::class_prompts(int hoi) const {
  return class_prompts(std::vector<int>{hoi}).front();
}

template <typename S>
Tensor<S> HoiModel<S>::text_features(const std::vector<int>& classes) const {
  const auto prompts = class_prompts(classes);
  std::vector<Tensor<S>> rows;
  rows.reserve(classes.size());
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& c = world_->classes[static_cast<std::size_t>(classes[k])];
    rows.push_back(encoders_->encode_text(c.verb, c.object, prompts[k]));
  }
  return concat_rows(rows);
}

template <typename S>
SceneInputs<S> HoiModel<S>::prepare(const Scene& scene) const {
  SceneInputs<S> in;
  in.scene = &scene;
  const int grid = config_.world.patch_grid;
  in.patches = image_patches<S>(scene.pixels, grid, config_.world.patch_pixels);
  if (config_.toggles.vlm_guide) in.frozen_features = Tensor<S>::constant(encoders_->frozen_visual_feature(in.patches));
  const FilteredDetections dets = filter_detections(scene.detections, config_.theta);
  in.pairs = make_pairs(dets);
  if (config_.toggles.visual_adapter) {
    std::vector<Detection> kept = dets.humans;
    kept.insert(kept.end(), dets.objects.begin(), dets.objects.end());
    in.adapter = adapter_context<S>(kept, grid, config_.world.n_objects + 1);
  }
  std::vector<Box> humans, objects, unions;
  for (const auto& p : in.pairs) {
    humans.push_back(p.human);
    objects.push_back(p.object);
    unions.push_back(union_box(p.human, p.object));
  }
  in.roi_human = roi_matrix<S>(humans, grid);
  in.roi_object = roi_matrix<S>(objects, grid);
  in.roi_union = roi_matrix<S>(unions, grid);
  return in;
}

template <typename S>
std::vector<Tensor<S>> HoiModel<S>::visual_prompts(const SceneInputs<S>& inputs) const {
  std::vector<Tensor<S>> prompts = bank_.visual_base();
  if (config_.toggles.vlm_guide) {
    if (!inputs.frozen_features.defined()) throw ContractError("scene inputs were prepared without frozen features");
    for (int i = 0; i < bank_.depth(); ++i)
      prompts[static_cast<std::size_t>(i)] = bank_.vlm_guide(i, prompts[static_cast<std::size_t>(i)], inputs.frozen_features);
  }
  return prompts;
}

template <typename S>
Tensor<S> HoiModel<S>::visual_grid(const SceneInputs<S>& inputs) const {
  PatchHook<S> hook;
  if (config_.toggles.visual_adapter && !inputs.adapter.empty()) {
    hook = [this, &inputs](int layer, const Tensor<S>& patches) { return adapters_.apply(layer, patches, inputs.adapter); };
  }
  return encoders_->encode_image(inputs.patches, visual_prompts(inputs), hook).grid;
}

template <typename S>
Tensor<S> HoiModel<S>::pair_features(const SceneInputs<S>& inputs) const {
  if (inputs.pairs.empty()) return {};
  Tensor<S> grid = visual_grid(inputs);
  Tensor<S> fused;
  if (config_.toggles.intra_fusion) {
    fused = intra_(matmul(Tensor<S>::constant(inputs.roi_human), grid), matmul(Tensor<S>::constant(inputs.roi_object), grid));
  } else {
    fused = matmul(Tensor<S>::constant(inputs.roi_union), grid);
  }
  return config_.toggles.inter_fusion ? inter_(fused) : fused;
}

template class HoiModel<float>;
template class HoiModel<double>;

}  // namespace hoi
