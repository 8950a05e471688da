#include "hoiprompt/pretrain.hpp"

#include "hoiprompt/losses.hpp"
#include "hoiprompt/optim.hpp"
#include "hoiprompt/roi.hpp"

namespace hoi {

namespace {

struct Sample {
  Matrix<double> frozen;  // D x d_v
  Matrix<double> rois;    // 2 x D (human, object)
  int label = 0;
};

std::vector<Sample> make_corpus(const World& world, const FrozenEncoders<double>& enc, int per_class, Rng rng) {
  std::vector<Sample> out;
  const auto& cfg = world.config;
  for (int k = 0; k < per_class; ++k) {
    for (const auto& c : world.classes) {
      Rng local = rng.derive(static_cast<std::uint64_t>(k * 1000 + c.id));
      Scene s = compose_scene(cfg, world.verbs, world.classes, {c.id}, local.bernoulli(cfg.distractor_prob), local);
      Sample sample;
      sample.frozen = enc.frozen_visual_feature(image_patches<double>(s.pixels, cfg.patch_grid, cfg.patch_pixels));
      sample.rois = roi_matrix<double>({s.interactions[0].human, s.interactions[0].object}, cfg.patch_grid);
      sample.label = c.id;
      out.push_back(std::move(sample));
    }
  }
  return out;
}

}  // namespace

FrozenEncoders<double> pretrain_encoders(const World& world, const RunConfig& config,
                                         const Matrix<double>& descriptions, PretrainReport* report,
                                         const std::function<void(const std::string&)>& log) {
  const EncoderDims dims = encoder_dims(config);
  FrozenEncoders<double> enc(dims, config.world.seed, true);
  Rng rng = Rng(config.world.seed).derive("pretrain");
  const auto corpus = make_corpus(world, enc, config.pretrain_scenes_per_class, rng.derive("corpus"));
  const auto heldout = make_corpus(world, enc, 2, rng.derive("heldout"));

  ParamStore<double> head_store;
  Rng head_rng = rng.derive("head");
  Linear<double> pair_proj(head_store, "pair_proj", "pretrain", 2 * dims.d_a, dims.d_a, head_rng, true);
  const double temperature = 10.0;
  const int n_classes = static_cast<int>(world.classes.size());
  if (descriptions.rows() != n_classes) throw DimensionError("pretrain: description rows do not match the class count");

  auto class_features = [&]() {
    std::vector<Tensor<double>> rows;
    for (const auto& c : world.classes) rows.push_back(enc.encode_text(c.verb, c.object, {}));
    return concat_rows(rows);
  };
  auto logits_for = [&](const std::vector<const Sample*>& batch, const Tensor<double>& text) {
    std::vector<Tensor<double>> rows;
    for (const Sample* s : batch) {
      Tensor<double> pooled = enc.project_visual(Tensor<double>::constant(s->rois * s->frozen));  // 2 x d_a
      Tensor<double> pair = concat_cols<double>({slice_rows(pooled, 0, 1), slice_rows(pooled, 1, 1)});
      rows.push_back(l2_normalize_rows(pair_proj(pair)));
    }
    return scale(matmul_nt(concat_rows(rows), text), temperature);
  };
  double consistency = 0;
  auto batch_loss = [&](const std::vector<const Sample*>& batch) {
    const Tensor<double> text = class_features();
    const Tensor<double> relation = relation_loss(text, descriptions);
    consistency = relation.item();
    Tensor<double> logp = log_softmax_rows(logits_for(batch, text));
    Matrix<double> onehot = Matrix<double>::Zero(static_cast<Index>(batch.size()), n_classes);
    for (std::size_t i = 0; i < batch.size(); ++i) onehot(static_cast<Index>(i), batch[i]->label) = 1.0;
    Tensor<double> contrastive = scale(sum(mul(Tensor<double>::constant(onehot), logp)), -1.0 / static_cast<double>(batch.size()));
    return total_loss(contrastive, relation, config.pretrain_consistency);
  };
  auto accuracy = [&](const std::vector<Sample>& set) {
    std::vector<const Sample*> all;
    for (const auto& s : set) all.push_back(&s);
    const Matrix<double> l = logits_for(all, class_features()).value();
    int hits = 0;
    for (Index i = 0; i < l.rows(); ++i) {
      Index arg;
      l.row(i).maxCoeff(&arg);
      hits += static_cast<int>(arg) == all[static_cast<std::size_t>(i)]->label;
    }
    return static_cast<double>(hits) / static_cast<double>(set.size());
  };

  AdamW<double> opt(AdamWConfig{3e-3, 0.9, 0.999, 1e-8, 0.0});
  AdamW<double> head_opt(AdamWConfig{3e-3, 0.9, 0.999, 1e-8, 0.0});
  Rng batch_rng = rng.derive("batches");
  const int batch_size = 32;
  double first = 0, last = 0;
  for (int step = 0; step < config.pretrain_steps; ++step) {
    std::vector<const Sample*> batch;
    for (int k = 0; k < batch_size; ++k)
      batch.push_back(&corpus[static_cast<std::size_t>(batch_rng.integer(0, static_cast<int>(corpus.size()) - 1))]);
    enc.store().zero_grad();
    head_store.zero_grad();
    Tensor<double> loss = batch_loss(batch);
    loss.backward();
    opt.step(enc.store());
    head_opt.step(head_store);
    if (step == 0) first = loss.item();
    last = loss.item();
    if (log && (step + 1) % 50 == 0) log("pretrain step " + std::to_string(step + 1) + " loss " + std::to_string(last));
  }
  if (report) {
    report->initial_loss = first;
    report->final_loss = last;
    report->consistency = consistency;
    report->train_accuracy = accuracy(corpus);
    report->heldout_accuracy = accuracy(heldout);
  }
  // hand the weights to a frozen instance
  return FrozenEncoders<double>::deserialize(enc.serialize(), "pretrained encoder");
}

}  // namespace hoi
