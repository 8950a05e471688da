#pragma once

// Frozen dual encoder with deep prompt slots.
//
// Text: [SOS, verb, object, EOS] + p prompt slots, bidirectional attention,
// feature read at EOS. Visual: [CLS, D patches] + p prompt slots. For layers
// 1..N the prompt slots entering layer i are the supplied prompts of layer i
// (whatever the previous layer emitted there is discarded); from layer N+1 on
// the slots propagate. N = 0 means no prompt slots at all.

#include <functional>
#include <string>
#include <vector>

#include "hoiprompt/config.hpp"
#include "hoiprompt/nn.hpp"
#include "hoiprompt/world.hpp"

namespace hoi {

struct EncoderDims {
  int d_v = 48, d_t = 32, d_a = 32;
  int layers = 12;
  int visual_heads = 4, text_heads = 4;
  int mlp_ratio = 4;
  int patch_grid = 7, patch_pixels = 4;
  int n_verbs = 12, n_objects = 10;
  double residual_gain = 0.5;

  int patches() const { return patch_grid * patch_grid; }
  int patch_dim() const { return patch_pixels * patch_pixels * 3; }
  int vocab() const { return 2 + n_verbs + n_objects; }
  bool operator==(const EncoderDims&) const = default;
};

EncoderDims encoder_dims(const RunConfig& config);

inline constexpr int kSosToken = 0;
inline constexpr int kEosToken = 1;
inline constexpr int kTextLength = 4;  // SOS verb object EOS
inline constexpr int kEosPosition = 3;

/// Flattens the image into D x (g*g*3) patch rows, patches in row-major grid order.
template <typename S>
Matrix<S> image_patches(const std::vector<float>& pixels, int patch_grid, int patch_pixels);

template <typename S>
struct VisualOutput {
  Tensor<S> grid;  // E_v: D x d_a
  Tensor<S> cls;   // c_K: 1 x d_v
};

/// Hook applied to the patch rows after each visual layer (1-based index).
template <typename S>
using PatchHook = std::function<Tensor<S>(int layer, const Tensor<S>& patches)>;

template <typename S>
class FrozenEncoders {
 public:
  /// Deterministic random initialisation. `trainable` is only set while the
  /// fixture pretraining runs; the visual core is never trainable.
  FrozenEncoders(const EncoderDims& dims, std::uint64_t seed, bool trainable = false);

  const EncoderDims& dims() const { return dims_; }
  ParamStore<S>& store() { return store_; }
  const ParamStore<S>& store() const { return store_; }

  /// W_t: 1 x d_a, unit norm. `prompts` holds the supplied prompts of layers 1..N (each p x d_t).
  Tensor<S> encode_text(int verb, int object, const std::vector<Tensor<S>>& prompts) const;

  /// E_v and c_K. `prompts` as for text (each p x d_v); `hook` may be empty.
  VisualOutput<S> encode_image(const Matrix<S>& patches, const std::vector<Tensor<S>>& prompts,
                               const PatchHook<S>& hook = {}) const;

  /// f_vis: D x d_v post-norm patch features of the plain encoder. Constant.
  Matrix<S> frozen_visual_feature(const Matrix<S>& patches) const;

  /// Projects D x d_v features to d_a (the VisualProj map).
  Tensor<S> project_visual(const Tensor<S>& features) const { return matmul(features, visual_proj_); }

  /// FNV-1a over every parameter name and value.
  std::uint64_t checksum() const {
    Fnv1a h;
    for (const auto& p : store_.params()) {
      h.update(p.name);
      h.update(p.tensor.value().data(), sizeof(S) * static_cast<std::size_t>(p.tensor.value().size()));
    }
    return h.digest();
  }

  /// Binary record: dims header, every parameter as f64, trailing checksum.
  std::string serialize() const;
  /// Loads weights into an encoder of matching dims; throws on any mismatch.
  static FrozenEncoders deserialize(const std::string& bytes, const std::string& what);

 private:
  Tensor<S> embed_text(int verb, int object) const;
  Tensor<S> embed_image(const Matrix<S>& patches) const;
  // Runs the layer stack over `base` rows followed by prompt slots.
  Tensor<S> run_layers(const std::vector<TransformerLayer<S>>& layers, Tensor<S> base,
                       const std::vector<Tensor<S>>& prompts, Index base_rows, const PatchHook<S>* hook) const;

  EncoderDims dims_;
  bool trainable_;
  ParamStore<S> store_;
  Tensor<S> token_embedding_, text_pos_;
  std::vector<TransformerLayer<S>> text_layers_;
  LayerNorm<S> text_ln_final_;
  Tensor<S> text_proj_;
  Linear<S> patch_embed_;
  Tensor<S> cls_token_, visual_pos_;
  LayerNorm<S> visual_ln_pre_;
  std::vector<TransformerLayer<S>> visual_layers_;
  LayerNorm<S> visual_ln_post_;
  Tensor<S> visual_proj_;
};

/// Box-geometry sinusoid used to condition the visual adapters (16 values).
RowVector<double> box_embedding(const Box& box, int patch_grid);
inline constexpr int kBoxEmbeddingDims = 16;
inline constexpr int kCategoryEmbeddingDims = 8;

/// Per-scene adapter inputs derived from the filtered detections.
template <typename S>
struct AdapterContext {
  Tensor<S> membership;  // D x n_det: patch centre inside detection box
  RowVector<S> covered;  // D: 1 where any detection covers the patch
  Tensor<S> geometry;    // n_det x 16
  Tensor<S> category;    // n_det x (n_objects + 1) one-hot
  bool empty() const { return !membership.defined(); }
};

template <typename S>
AdapterContext<S> adapter_context(const std::vector<Detection>& detections, int patch_grid, int n_categories);

/// A_i: X + covered * (gelu(X W_down + M (cond W_c)) W_up); W_up zero-initialised.
template <typename S>
struct VisualAdapters {
  std::vector<Tensor<S>> down, cond, up;
  Tensor<S> category_table;

  VisualAdapters() = default;
  VisualAdapters(ParamStore<S>& store, int layers, int width, int rank, int n_categories, Rng& rng);

  Tensor<S> apply(int layer, const Tensor<S>& patches, const AdapterContext<S>& ctx) const;
};

}  // namespace hoi
