#include "hoiprompt/gradaudit.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "hoiprompt/gradcheck.hpp"
#include "hoiprompt/trainer.hpp"

namespace hoi {

std::vector<GroupCheck> audit_gradients(const RunConfig& config, std::shared_ptr<const FrozenEncoders<double>> encoders,
                                        const World& world, const SplitSpec& split, const GuidanceEmbeddings& guidance,
                                        const AuditOptions& options) {
  RunConfig cfg = config;
  cfg.seed = options.seed;
  HoiModel<double> model(cfg, encoders, world, split, guidance);
  Rng rng = Rng(options.seed).derive("audit");
  if (options.randomize_up) {
    for (auto& p : model.params().params()) {
      const auto& n = p.name;
      if (n.size() < 3 || n.compare(n.size() - 3, 3, ".up") != 0) continue;
      for (Index i = 0; i < p.tensor.value().size(); ++i) p.tensor.mutable_value().data()[i] = rng.normal(0.0, 0.1);
    }
  }

  // prefer scenes with several pairs so inter fusion sees context
  std::vector<SceneInputs<double>> inputs;
  std::vector<Matrix<double>> targets;
  std::vector<const Scene*> pool = training_scenes(world, split);
  std::shuffle(pool.begin(), pool.end(), rng.engine());
  for (int want_pairs : {2, 1}) {
    for (const Scene* s : pool) {
      if (static_cast<int>(inputs.size()) >= options.scenes) break;
      SceneInputs<double> in = model.prepare(*s);
      if (static_cast<int>(in.pairs.size()) < want_pairs) continue;
      bool dup = false;
      for (const auto& have : inputs) dup = dup || have.scene == s;
      if (dup) continue;
      targets.push_back(pair_targets(*s, in.pairs, world, split));
      inputs.push_back(std::move(in));
    }
  }
  if (inputs.empty()) throw DatasetError("gradient audit found no training scene with pairs");
  std::vector<const SceneInputs<double>*> batch;
  std::vector<const Matrix<double>*> batch_targets;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    batch.push_back(&inputs[i]);
    batch_targets.push_back(&targets[i]);
  }
  const std::function<Tensor<double>()> loss = [&]() { return batch_loss(model, batch, batch_targets); };

  // Perturbing a text-side group leaves the pair features unchanged and vice versa, so the
  // other side is replayed as a constant. A wrong split would show up as a failed group.
  const Tensor<double> text_const = Tensor<double>::constant(model.text_features(model.selected().classes).value());
  std::vector<Tensor<double>> pairs_const;
  for (const auto* in : batch)
    pairs_const.push_back(in->pairs.empty() ? Tensor<double>() : Tensor<double>::constant(model.pair_features(*in).value()));
  const std::function<Tensor<double>()> text_side = [&]() {
    return batch_loss_from(model, model.text_features(model.selected().classes), pairs_const, batch, batch_targets);
  };
  const std::function<Tensor<double>()> visual_side = [&]() {
    std::vector<Tensor<double>> feats;
    for (const auto* in : batch) feats.push_back(in->pairs.empty() ? Tensor<double>() : model.pair_features(*in));
    return batch_loss_from(model, text_const, feats, batch, batch_targets);
  };
  auto loss_for = [&](const std::string& group) -> const std::function<Tensor<double>()>& {
    if (group == "llm_guide" || group == "utpl") return text_side;
    if (group == "visual_adapter" || group == "intra_fusion" || group == "inter_fusion") return visual_side;
    return loss;
  };

  struct Acc {
    double diff2 = 0, a2 = 0, n2 = 0;
    std::size_t entries = 0, tensors = 0;
  };
  std::map<std::string, Acc> acc;
  // one backward pass supplies every analytic gradient
  model.params().zero_grad();
  loss().backward();
  std::vector<Matrix<double>> analytic;
  for (auto& p : model.params().params()) {
    if (!p.trainable) continue;
    analytic.push_back(p.tensor.has_grad() ? p.tensor.grad() : Matrix<double>::Zero(p.tensor.rows(), p.tensor.cols()));
  }
  model.params().zero_grad();
  std::uint64_t k = 0;
  for (auto& p : model.params().params()) {
    if (!p.trainable) continue;
    const Matrix<double>& a_grad = analytic[k++];
    const GradCheckResult r = gradcheck_against<double>(loss_for(p.group), p.tensor, a_grad, options.step, options.entries_per_tensor,
                                                        splitmix64(options.seed + k));
    Acc& a = acc[p.group];
    const double diff = r.rel_error * std::max({r.analytic_norm, r.numeric_norm, kNormFloor});
    a.diff2 += diff * diff;
    a.a2 += r.analytic_norm * r.analytic_norm;
    a.n2 += r.numeric_norm * r.numeric_norm;
    a.entries += r.entries;
    ++a.tensors;
  }

  std::vector<GroupCheck> out;
  for (const auto& group : trainable_groups()) {
    GroupCheck g;
    g.group = group;
    auto it = acc.find(group);
    if (it == acc.end()) {
      g.used = false;
      out.push_back(g);
      continue;
    }
    const Acc& a = it->second;
    g.entries = a.entries;
    g.tensors = a.tensors;
    g.used = a.a2 > 0 || a.n2 > 0;
    g.rel_error = std::sqrt(a.diff2) / std::max({std::sqrt(a.a2), std::sqrt(a.n2), kNormFloor});
    g.passed = g.rel_error < options.tolerance;
    out.push_back(g);
  }
  std::set<std::string> frozen;
  for (const auto& p : model.encoders().store().params()) frozen.insert(p.group);
  for (const auto& f : frozen) {
    GroupCheck g;
    g.group = "encoder." + f;
    g.frozen = true;
    out.push_back(g);
  }
  return out;
}

std::string format_audit(const std::vector<GroupCheck>& checks) {
  std::string out;
  char line[160];
  for (const auto& c : checks) {
    if (c.frozen) {
      std::snprintf(line, sizeof line, "%-22s no-grad\n", c.group.c_str());
    } else if (!c.used) {
      std::snprintf(line, sizeof line, "%-22s unused (disabled by toggles)\n", c.group.c_str());
    } else {
      std::snprintf(line, sizeof line, "%-22s %s  rel.err %.3e  (%zu entries, %zu tensors)\n", c.group.c_str(),
                    c.passed ? "PASS" : "FAIL", c.rel_error, c.entries, c.tensors);
    }
    out += line;
  }
  return out;
}

}  // namespace hoi
