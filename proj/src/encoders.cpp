#include "hoiprompt/encoders.hpp"

#include <cmath>
#include <numbers>

#include "hoiprompt/blob.hpp"

namespace hoi {

EncoderDims encoder_dims(const RunConfig& c) {
  EncoderDims d;
  d.d_v = c.d_v;
  d.d_t = c.d_t;
  d.d_a = c.d_a;
  d.layers = c.layers;
  d.visual_heads = c.visual_heads;
  d.text_heads = c.text_heads;
  d.mlp_ratio = c.mlp_ratio;
  d.patch_grid = c.world.patch_grid;
  d.patch_pixels = c.world.patch_pixels;
  d.n_verbs = c.world.n_verbs;
  d.n_objects = c.world.n_objects;
  d.residual_gain = c.residual_gain;
  return d;
}

template <typename S>
Matrix<S> image_patches(const std::vector<float>& pixels, int patch_grid, int patch_pixels) {
  const int size = patch_grid * patch_pixels;
  if (static_cast<int>(pixels.size()) != size * size * 3) {
    throw DimensionError("image has " + std::to_string(pixels.size()) + " values, expected " +
                         std::to_string(size * size * 3) + " for a " + std::to_string(patch_grid) + "x" +
                         std::to_string(patch_grid) + " patch grid");
  }
  Matrix<S> out(patch_grid * patch_grid, patch_pixels * patch_pixels * 3);
  for (int py = 0; py < patch_grid; ++py) {
    for (int px = 0; px < patch_grid; ++px) {
      Index k = 0;
      for (int y = 0; y < patch_pixels; ++y) {
        for (int x = 0; x < patch_pixels; ++x) {
          const auto* p = &pixels[static_cast<std::size_t>(((py * patch_pixels + y) * size + px * patch_pixels + x) * 3)];
          for (int ch = 0; ch < 3; ++ch) out(py * patch_grid + px, k++) = static_cast<S>(p[ch]);
        }
      }
    }
  }
  return out;
}

namespace {

// 2-D sinusoidal position code for patch rows, random code for the class token.
Matrix<double> visual_positions(int grid, int width, Rng& rng) {
  Matrix<double> pos(1 + grid * grid, width);
  for (int j = 0; j < width; ++j) pos(0, j) = rng.normal(0.0, 0.5);
  const int quarter = width / 4;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const Index r = 1 + i * grid + j;
      for (int k = 0; k < width; ++k) pos(r, k) = 0.0;
      for (int f = 0; f < quarter; ++f) {
        const double freq = std::pow(grid * 2.0, -static_cast<double>(f) / quarter) * std::numbers::pi;
        pos(r, 4 * f + 0) = std::sin(freq * j);
        pos(r, 4 * f + 1) = std::cos(freq * j);
        pos(r, 4 * f + 2) = std::sin(freq * i);
        pos(r, 4 * f + 3) = std::cos(freq * i);
      }
      for (int k = 0; k < width; ++k) pos(r, k) = 0.5 * pos(r, k) + rng.normal(0.0, 0.05);
    }
  }
  return pos;
}

constexpr const char* kEncoderMagic = "HOIENC01";

}  // namespace

template <typename S>
FrozenEncoders<S>::FrozenEncoders(const EncoderDims& dims, std::uint64_t seed, bool trainable)
    : dims_(dims), trainable_(trainable) {
  if (dims.layers < 1) throw ConfigError("encoder needs at least one layer");
  Rng root = Rng(seed).derive("encoders");
  Rng rng = root.derive("text");
  const bool t = trainable;
  token_embedding_ = store_.add("text.token_embedding", "text", init::normal<S>(rng, dims.vocab(), dims.d_t, 1.0), t);
  text_pos_ = store_.add("text.position", "text", init::normal<S>(rng, kTextLength, dims.d_t, 0.1), t);
  for (int i = 0; i < dims.layers; ++i) {
    text_layers_.emplace_back(store_, "text.layer" + std::to_string(i + 1), "text", dims.d_t, dims.text_heads,
                              dims.d_t * dims.mlp_ratio, rng, t, dims.residual_gain);
  }
  text_ln_final_ = LayerNorm<S>(store_, "text.ln_final", "text", dims.d_t, t);
  text_proj_ = store_.add("text.proj", "text", init::fan_in<S>(rng, dims.d_t, dims.d_a), t);

  rng = root.derive("visual");
  patch_embed_ = Linear<S>(store_, "visual.patch_embed", "visual", dims.patch_dim(), dims.d_v, rng, false);
  cls_token_ = store_.add("visual.cls", "visual", init::normal<S>(rng, 1, dims.d_v, 0.5), false);
  visual_pos_ = store_.add("visual.position", "visual", visual_positions(dims.patch_grid, dims.d_v, rng).cast<S>(), false);
  visual_ln_pre_ = LayerNorm<S>(store_, "visual.ln_pre", "visual", dims.d_v, false);
  for (int i = 0; i < dims.layers; ++i) {
    visual_layers_.emplace_back(store_, "visual.layer" + std::to_string(i + 1), "visual", dims.d_v, dims.visual_heads,
                                dims.d_v * dims.mlp_ratio, rng, false, dims.residual_gain);
  }
  visual_ln_post_ = LayerNorm<S>(store_, "visual.ln_post", "visual", dims.d_v, false);
  visual_proj_ = store_.add("visual.proj", "visual", init::fan_in<S>(rng, dims.d_v, dims.d_a), t);
}

template <typename S>
Tensor<S> FrozenEncoders<S>::run_layers(const std::vector<TransformerLayer<S>>& layers, Tensor<S> base,
                                        const std::vector<Tensor<S>>& prompts, Index base_rows,
                                        const PatchHook<S>* hook) const {
  const int depth = static_cast<int>(prompts.size());
  if (depth > dims_.layers) {
    throw ConfigError("prompt depth N=" + std::to_string(depth) + " exceeds layer count K=" + std::to_string(dims_.layers));
  }
  Tensor<S> carried;  // prompt slots emitted by the previous layer
  for (int i = 1; i <= dims_.layers; ++i) {
    Tensor<S> input = base;
    if (i <= depth) {
      input = concat_rows<S>({base, prompts[static_cast<std::size_t>(i - 1)]});
    } else if (depth > 0) {
      input = concat_rows<S>({base, carried});
    }
    Tensor<S> out = layers[static_cast<std::size_t>(i - 1)](input);
    if (depth > 0) {
      base = slice_rows(out, 0, base_rows);
      carried = slice_rows(out, base_rows, out.rows() - base_rows);
    } else {
      base = out;
    }
    if (hook && *hook) {
      Tensor<S> patches = (*hook)(i, slice_rows(base, 1, base_rows - 1));
      base = concat_rows<S>({slice_rows(base, 0, 1), patches});
    }
  }
  return base;
}

template <typename S>
Tensor<S> FrozenEncoders<S>::embed_text(int verb, int object) const {
  if (verb < 0 || verb >= dims_.n_verbs || object < 0 || object >= dims_.n_objects) {
    throw DimensionError("text tokens out of range: verb " + std::to_string(verb) + ", object " + std::to_string(object));
  }
  Matrix<S> onehot = Matrix<S>::Zero(kTextLength, dims_.vocab());
  onehot(0, kSosToken) = 1;
  onehot(1, 2 + verb) = 1;
  onehot(2, 2 + dims_.n_verbs + object) = 1;
  onehot(3, kEosToken) = 1;
  return add(matmul(Tensor<S>::constant(std::move(onehot)), token_embedding_), text_pos_);
}

template <typename S>
Tensor<S> FrozenEncoders<S>::encode_text(int verb, int object, const std::vector<Tensor<S>>& prompts) const {
  Tensor<S> tokens = run_layers(text_layers_, embed_text(verb, object), prompts, kTextLength, nullptr);
  Tensor<S> eos = text_ln_final_(slice_rows(tokens, kEosPosition, 1));
  return l2_normalize_rows(matmul(eos, text_proj_));
}

template <typename S>
Tensor<S> FrozenEncoders<S>::embed_image(const Matrix<S>& patches) const {
  if (patches.rows() != dims_.patches() || patches.cols() != dims_.patch_dim()) {
    throw DimensionError("patch matrix " + shape_string(patches.rows(), patches.cols()) + " does not match grid " +
                         shape_string(dims_.patches(), dims_.patch_dim()));
  }
  Tensor<S> tokens = concat_rows<S>({cls_token_, patch_embed_(Tensor<S>::constant(patches))});
  return visual_ln_pre_(add(tokens, visual_pos_));
}

template <typename S>
VisualOutput<S> FrozenEncoders<S>::encode_image(const Matrix<S>& patches, const std::vector<Tensor<S>>& prompts,
                                                const PatchHook<S>& hook) const {
  const Index base_rows = 1 + dims_.patches();
  Tensor<S> out = run_layers(visual_layers_, embed_image(patches), prompts, base_rows, &hook);
  VisualOutput<S> r;
  r.cls = slice_rows(out, 0, 1);
  r.grid = project_visual(visual_ln_post_(slice_rows(out, 1, dims_.patches())));
  return r;
}

template <typename S>
Matrix<S> FrozenEncoders<S>::frozen_visual_feature(const Matrix<S>& patches) const {
  Tensor<S> out = run_layers(visual_layers_, embed_image(patches), {}, 1 + dims_.patches(), nullptr);
  return visual_ln_post_(slice_rows(out, 1, dims_.patches())).value();
}

template <typename S>
std::string FrozenEncoders<S>::serialize() const {
  BlobWriter w(kEncoderMagic);
  for (int v : {dims_.d_v, dims_.d_t, dims_.d_a, dims_.layers, dims_.visual_heads, dims_.text_heads, dims_.mlp_ratio,
                dims_.patch_grid, dims_.patch_pixels, dims_.n_verbs, dims_.n_objects}) {
    w.u64(static_cast<std::uint64_t>(v));
  }
  w.u64(std::bit_cast<std::uint64_t>(dims_.residual_gain));
  w.u64(store_.params().size());
  for (const auto& p : store_.params()) w.matrix(p.name, p.tensor.value());
  return w.finish();
}

template <typename S>
FrozenEncoders<S> FrozenEncoders<S>::deserialize(const std::string& bytes, const std::string& what) {
  BlobReader r(bytes, kEncoderMagic, what);
  EncoderDims d;
  int* fields[] = {&d.d_v, &d.d_t, &d.d_a, &d.layers, &d.visual_heads, &d.text_heads, &d.mlp_ratio,
                   &d.patch_grid, &d.patch_pixels, &d.n_verbs, &d.n_objects};
  for (int* f : fields) *f = static_cast<int>(r.u64());
  d.residual_gain = std::bit_cast<double>(r.u64());
  FrozenEncoders enc(d, 0, false);
  const auto count = r.u64();
  if (count != enc.store_.params().size()) {
    throw std::runtime_error(what + ": holds " + std::to_string(count) + " parameters, expected " +
                             std::to_string(enc.store_.params().size()));
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    auto [name, m] = r.matrix();
    auto* p = enc.store_.find(name);
    if (!p) throw std::runtime_error(what + ": unknown parameter '" + name + "'");
    if (m.rows() != p->tensor.rows() || m.cols() != p->tensor.cols()) {
      throw std::runtime_error(what + ": parameter '" + name + "' has shape " + shape_string(m.rows(), m.cols()) +
                               ", expected " + shape_string(p->tensor.rows(), p->tensor.cols()));
    }
    p->tensor.mutable_value() = m.cast<S>();
  }
  return enc;
}

RowVector<double> box_embedding(const Box& box, int patch_grid) {
  RowVector<double> e(kBoxEmbeddingDims);
  const double coords[4] = {box.x1 / patch_grid, box.y1 / patch_grid, box.x2 / patch_grid, box.y2 / patch_grid};
  const double freqs[2] = {std::numbers::pi, 2.0 * std::numbers::pi};
  Index k = 0;
  for (double c : coords) {
    for (double f : freqs) {
      e(k++) = std::sin(f * c);
      e(k++) = std::cos(f * c);
    }
  }
  return e;
}

template <typename S>
AdapterContext<S> adapter_context(const std::vector<Detection>& detections, int patch_grid, int n_categories) {
  AdapterContext<S> ctx;
  const Index n = static_cast<Index>(detections.size());
  const Index patches = static_cast<Index>(patch_grid) * patch_grid;
  ctx.covered = RowVector<S>::Zero(patches);
  if (n == 0) return ctx;
  Matrix<S> member = Matrix<S>::Zero(patches, n);
  Matrix<S> geometry(n, kBoxEmbeddingDims);
  Matrix<S> category = Matrix<S>::Zero(n, n_categories);
  for (Index d = 0; d < n; ++d) {
    const auto& det = detections[static_cast<std::size_t>(d)];
    for (int i = 0; i < patch_grid; ++i) {
      for (int j = 0; j < patch_grid; ++j) {
        const double cx = j + 0.5, cy = i + 0.5;
        if (cx >= det.box.x1 && cx <= det.box.x2 && cy >= det.box.y1 && cy <= det.box.y2) {
          member(i * patch_grid + j, d) = 1;
          ctx.covered(i * patch_grid + j) = 1;
        }
      }
    }
    geometry.row(d) = box_embedding(det.box, patch_grid).cast<S>();
    if (det.category < 0 || det.category >= n_categories) {
      throw DimensionError("detection category " + std::to_string(det.category) + " out of range");
    }
    category(d, det.category) = 1;
  }
  ctx.membership = Tensor<S>::constant(std::move(member));
  ctx.geometry = Tensor<S>::constant(std::move(geometry));
  ctx.category = Tensor<S>::constant(std::move(category));
  return ctx;
}

template <typename S>
VisualAdapters<S>::VisualAdapters(ParamStore<S>& store, int layers, int width, int rank, int n_categories, Rng& rng) {
  category_table = store.add("adapter.category", "visual_adapter",
                             init::normal<S>(rng, n_categories, kCategoryEmbeddingDims, 1.0), true);
  const int cond_dims = kBoxEmbeddingDims + kCategoryEmbeddingDims;
  for (int i = 1; i <= layers; ++i) {
    const std::string name = "adapter.layer" + std::to_string(i);
    down.push_back(store.add(name + ".down", "visual_adapter", init::fan_in<S>(rng, width, rank), true));
    cond.push_back(store.add(name + ".cond", "visual_adapter", init::fan_in<S>(rng, cond_dims, rank), true));
    up.push_back(store.add(name + ".up", "visual_adapter", init::zeros<S>(rank, width), true));
  }
}

template <typename S>
Tensor<S> VisualAdapters<S>::apply(int layer, const Tensor<S>& patches, const AdapterContext<S>& ctx) const {
  if (ctx.empty()) return patches;
  const auto i = static_cast<std::size_t>(layer - 1);
  Tensor<S> cond_rows = concat_cols<S>({ctx.geometry, matmul(ctx.category, category_table)});
  Tensor<S> hidden = gelu(add(matmul(patches, down[i]), matmul(ctx.membership, matmul(cond_rows, cond[i]))));
  return add(patches, scale_rows(matmul(hidden, up[i]), ctx.covered));
}

#define HOI_INSTANTIATE_ENCODERS(S)                                                                     \
  template Matrix<S> image_patches<S>(const std::vector<float>&, int, int);                             \
  template class FrozenEncoders<S>;                                                                     \
  template AdapterContext<S> adapter_context<S>(const std::vector<Detection>&, int, int);               \
  template struct VisualAdapters<S>;

HOI_INSTANTIATE_ENCODERS(float)
HOI_INSTANTIATE_ENCODERS(double)

}  // namespace hoi
