#include "hoiprompt/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hoi {

Matrix<double> pair_targets(const Scene& scene, const std::vector<PairCandidate>& pairs, const World& world,
                            const SplitSpec& split) {
  Matrix<double> t = Matrix<double>::Zero(static_cast<Index>(pairs.size()), world.config.n_verbs);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    for (const auto& it : scene.interactions) {
      const auto& cls = world.classes[static_cast<std::size_t>(it.hoi)];
      if (object_category(cls.object) != p.object_category) continue;
      if (iou(p.human, it.human) < kMatchIou || iou(p.object, it.object) < kMatchIou) continue;
      if (split.is_unseen(it.hoi)) {
        throw ContractError("scene " + std::to_string(scene.id) + " exposes a positive for unseen class " +
                            std::to_string(it.hoi) + " during training");
      }
      t(static_cast<Index>(k), cls.verb) = 1.0;
    }
  }
  return t;
}

template <typename S>
Tensor<S> batch_loss(const HoiModel<S>& model, const std::vector<const SceneInputs<S>*>& scenes,
                     const std::vector<const Matrix<S>*>& targets, LossParts* parts) {
  std::vector<Tensor<S>> pair_feats;
  for (const auto* in : scenes) pair_feats.push_back(in->pairs.empty() ? Tensor<S>() : model.pair_features(*in));
  return batch_loss_from(model, model.text_features(model.selected().classes), pair_feats, scenes, targets, parts);
}

template <typename S>
Tensor<S> batch_loss_from(const HoiModel<S>& model, const Tensor<S>& text, const std::vector<Tensor<S>>& pair_feats,
                          const std::vector<const SceneInputs<S>*>& scenes, const std::vector<const Matrix<S>*>& targets,
                          LossParts* parts) {
  const auto& cfg = model.config();
  std::vector<Tensor<S>> scores;
  std::vector<const Matrix<S>*> used;
  Index rows = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (scenes[i]->pairs.empty()) continue;
    Tensor<S> probs = score_pairs(pair_feats[i], text, model.logit_scale());
    // detector prior (s_h * s_o)^tau_train on the softmax path
    const auto& pairs = scenes[i]->pairs;
    RowVector<S> prior(static_cast<Index>(pairs.size()));
    for (std::size_t k = 0; k < pairs.size(); ++k)
      prior(static_cast<Index>(k)) = static_cast<S>(std::pow(pairs[k].human_score * pairs[k].object_score, cfg.tau_train));
    scores.push_back(scale_rows(action_scores(probs, model.selected_align()), prior));
    used.push_back(targets[i]);
    rows += targets[i]->rows();
  }
  Tensor<S> focal = Tensor<S>::scalar(0);
  int clamped = 0;
  if (!scores.empty()) {
    Matrix<S> all_targets(rows, used.front()->cols());
    Index r = 0;
    for (const auto* t : used) {
      all_targets.middleRows(r, t->rows()) = *t;
      r += t->rows();
    }
    focal = focal_loss(concat_rows(scores), all_targets, cfg.focal_gamma, cfg.focal_alpha, &clamped);
  }
  Tensor<S> relation = relation_loss(text, model.selected_descriptions());
  Tensor<S> total = total_loss(focal, relation, cfg.relation_weight);
  if (parts) {
    parts->focal = static_cast<double>(focal.item());
    parts->relation = static_cast<double>(relation.item());
    parts->total = static_cast<double>(total.item());
    parts->clamped = clamped;
  }
  return total;
}

template <typename S>
Trainer<S>::Trainer(HoiModel<S>& model, const World& world, const SplitSpec& split)
    : model_(model),
      optimizer_(AdamWConfig{model.config().lr, 0.9, 0.999, 1e-8, model.config().weight_decay}) {
  for (const Scene* s : training_scenes(world, split)) {
    SceneInputs<S> in = model.prepare(*s);
    targets_.push_back(pair_targets(*s, in.pairs, world, split).template cast<S>());
    inputs_.push_back(std::move(in));
  }
  if (inputs_.empty()) throw DatasetError("training split is empty");
}

template <typename S>
LossParts Trainer<S>::train_epoch(int epoch) {
  const auto& cfg = model_.config();
  std::vector<std::size_t> order(inputs_.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng(cfg.seed).derive("epoch").derive(static_cast<std::uint64_t>(epoch));
  std::shuffle(order.begin(), order.end(), rng.engine());

  LossParts mean;
  int batches = 0;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
    std::vector<const SceneInputs<S>*> batch;
    std::vector<const Matrix<S>*> targets;
    for (std::size_t k = start; k < end; ++k) {
      batch.push_back(&inputs_[order[k]]);
      targets.push_back(&targets_[order[k]]);
    }
    if (cfg.warmup_steps > 0) optimizer_.set_lr(cfg.lr * std::min(1.0, (steps_ + 1.0) / cfg.warmup_steps));
    model_.params().zero_grad();
    LossParts parts;
    Tensor<S> loss = batch_loss(model_, batch, targets, &parts);
    if (!std::isfinite(parts.total)) {
      throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(steps_ + 1));
    }
    loss.backward();
    optimizer_.step(model_.params());
    ++steps_;
    history_.push_back({epoch, static_cast<int>(steps_), parts});
    mean.total += parts.total;
    mean.focal += parts.focal;
    mean.relation += parts.relation;
    mean.clamped += parts.clamped;
    ++batches;
  }
  model_.params().zero_grad();
  if (batches) {
    mean.total /= batches;
    mean.focal /= batches;
    mean.relation /= batches;
  }
  return mean;
}

template <typename S>
std::vector<Prediction> predict(const HoiModel<S>& model, const std::vector<const Scene*>& scenes, double tau) {
  const auto& cfg = model.config();
  const auto& sel = model.selected();
  const Matrix<double> align = sel.align;
  const Tensor<S> text = model.text_features(sel.classes);
  std::vector<Prediction> preds;
  for (const Scene* scene : scenes) {
    const SceneInputs<S> in = model.prepare(*scene);
    if (in.pairs.empty()) continue;
    const Matrix<double> logits = class_logits(model.pair_features(in), text, model.logit_scale()).value().template cast<double>();
    Matrix<double> action;
    if (cfg.sigmoid_on_logits) {
      action = verb_log_odds(logits, align);
    } else {
      Matrix<double> probs = logits;
      for (Index i = 0; i < probs.rows(); ++i) {
        const double top = probs.row(i).maxCoeff();
        probs.row(i) = (probs.row(i).array() - top).exp().matrix();
        probs.row(i) /= probs.row(i).sum();
      }
      action = probs * align;
    }
    for (std::size_t k = 0; k < in.pairs.size(); ++k) {
      const auto& p = in.pairs[k];
      for (int v = 0; v < cfg.world.n_verbs; ++v) {
        const int hoi = model.world().find_class(v, p.object_category - 1);
        if (hoi < 0) continue;
        Prediction pred;
        pred.scene = scene->id;
        pred.pair = static_cast<int>(k);
        pred.human = p.human;
        pred.object = p.object;
        pred.hoi = hoi;
        pred.score = inference_score(p.human_score, p.object_score, action(static_cast<Index>(k), v), tau);
        preds.push_back(pred);
      }
    }
  }
  return preds;
}

#define HOI_INSTANTIATE_TRAINER(S)                                                                          \
  template class Trainer<S>;                                                                                \
  template Tensor<S> batch_loss<S>(const HoiModel<S>&, const std::vector<const SceneInputs<S>*>&,          \
                                   const std::vector<const Matrix<S>*>&, LossParts*);                      \
  template Tensor<S> batch_loss_from<S>(const HoiModel<S>&, const Tensor<S>&, const std::vector<Tensor<S>>&,   \
                                        const std::vector<const SceneInputs<S>*>&,                         \
                                        const std::vector<const Matrix<S>*>&, LossParts*);                 \
  template std::vector<Prediction> predict<S>(const HoiModel<S>&, const std::vector<const Scene*>&, double);

HOI_INSTANTIATE_TRAINER(float)
HOI_INSTANTIATE_TRAINER(double)

}  // namespace hoi
