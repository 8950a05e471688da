#pragma once

// Learnable prompt stack. Per prompt layer i (1..N):
//   h_V[i]        base visual prompts (p x d_v)
//   h_T[i]      = Proj_i(h_V[i])                                  (p x d_t)
//   hat h_T[i,c]= text_guide_i(h_T[i]; description row of c)      per class
//   hat h_V[i]  = visual_guide_i(h_V[i]; f_vis of the image)      per image
//   til h_T[i,u]= utpl_i(hat h_T[i,u]; [disparity_u, hat h_T[i,s], hat h_T[i,u]])
// Every guidance adapter starts as an exact identity (zero W_up).

#include <string>
#include <vector>

#include "hoiprompt/guidance.hpp"
#include "hoiprompt/nn.hpp"

namespace hoi {

struct PromptShape {
  int depth = 9;   // N
  int tokens = 2;  // p
  int d_v = 48, d_t = 32;
};

template <typename S>
class PromptBank {
 public:
  PromptBank() = default;
  PromptBank(ParamStore<S>& store, const PromptShape& shape, Rng& rng) : shape_(shape) {
    for (int i = 1; i <= shape.depth; ++i) {
      const std::string layer = std::to_string(i);
      visual_base_.push_back(store.add("prompt.visual" + layer, "prompt", init::normal<S>(rng, shape.tokens, shape.d_v, 0.02), true));
      proj_.push_back(Linear<S>(store, "prompt.proj" + layer, "proj", shape.d_v, shape.d_t, rng, true));
      text_guide_.emplace_back(store, "guide.text" + layer, "llm_guide", shape.d_t, shape.d_t / 4, 1, rng);
      visual_guide_.emplace_back(store, "guide.visual" + layer, "vlm_guide", shape.d_v, shape.d_v / 4, 1, rng);
      utpl_.emplace_back(store, "guide.utpl" + layer, "utpl", shape.d_t, shape.d_t / 4, 1, rng);
    }
  }

  const PromptShape& shape() const { return shape_; }
  int depth() const { return shape_.depth; }

  const std::vector<Tensor<S>>& visual_base() const { return visual_base_; }

  /// h_T = Proj(h_V) for one layer (0-based).
  Tensor<S> project(int layer, const Tensor<S>& visual) const { return proj_[static_cast<std::size_t>(layer)](visual); }

  std::vector<Tensor<S>> base_text() const {
    std::vector<Tensor<S>> out;
    for (int i = 0; i < depth(); ++i) out.push_back(project(i, visual_base_[static_cast<std::size_t>(i)]));
    return out;
  }

  /// Class-specific prompts from the class's description row (1 x d_t constant).
  Tensor<S> llm_guide(int layer, const Tensor<S>& text, const Tensor<S>& description) const {
    return text_guide_[static_cast<std::size_t>(layer)](text, description);
  }

  /// Image-conditioned prompts; `frozen_features` is f_vis (D x d_v constant).
  Tensor<S> vlm_guide(int layer, const Tensor<S>& visual, const Tensor<S>& frozen_features) const {
    return visual_guide_[static_cast<std::size_t>(layer)](visual, frozen_features);
  }

  /// Unseen refinement over [disparity (m rows), related seen prompts, own prompts].
  Tensor<S> utpl_refine(int layer, const Tensor<S>& unseen, const Tensor<S>& related, const Tensor<S>& disparity) const {
    return utpl_[static_cast<std::size_t>(layer)](unseen, concat_rows<S>({disparity, related, unseen}));
  }

  const GuidanceAdapter<S>& text_guide(int layer) const { return text_guide_[static_cast<std::size_t>(layer)]; }
  const GuidanceAdapter<S>& visual_guide(int layer) const { return visual_guide_[static_cast<std::size_t>(layer)]; }
  const GuidanceAdapter<S>& utpl(int layer) const { return utpl_[static_cast<std::size_t>(layer)]; }

 private:
  PromptShape shape_;
  std::vector<Tensor<S>> visual_base_;
  std::vector<Linear<S>> proj_;
  std::vector<GuidanceAdapter<S>> text_guide_, visual_guide_, utpl_;
};

/// Guidance embeddings converted to constant tensors of the model precision.
template <typename S>
struct GuidanceTensors {
  std::vector<Tensor<S>> descriptions;  // per class, 1 x d_t
  std::vector<Tensor<S>> disparities;   // per class, m x d_t (undefined for seen)
  std::vector<int> related_seen;

  explicit GuidanceTensors(const GuidanceEmbeddings& g) : related_seen(g.related_seen) {
    for (int c = 0; c < g.classes(); ++c) {
      descriptions.push_back(Tensor<S>::constant(g.descriptions.row(c).template cast<S>()));
      const auto& d = g.disparities[static_cast<std::size_t>(c)];
      disparities.push_back(d.rows() ? Tensor<S>::constant(d.template cast<S>()) : Tensor<S>());
    }
  }
  GuidanceTensors() = default;
};

}  // namespace hoi
