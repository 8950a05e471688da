#include "hoiprompt/guidance.hpp"

namespace hoi {

namespace {

Matrix<double> gaussian(Rng& rng, Index rows, Index cols, double stddev) {
  Matrix<double> m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
  return m;
}

constexpr int kVerbNoiseDims = 6;
constexpr int kObjectDims = 8;

}  // namespace

GuidanceEmbeddings build_guidance_fixtures(const World& world, const SplitSpec& split, const GuidanceConfig& config,
                                           std::uint64_t seed) {
  if (config.width < 1 || config.sentences < 1) throw DatasetError("guidance fixtures need width >= 1 and m >= 1");
  Rng root = Rng(seed).derive("guidance");
  const int n_verbs = world.config.n_verbs;
  const int gestures = gesture_count(n_verbs);
  const int verb_dims = kRelationCount + gestures + kVerbNoiseDims;

  // verb latent mirrors the visual factors (relation, gesture) plus an idiosyncratic part
  Matrix<double> verb_latent = Matrix<double>::Zero(n_verbs, verb_dims);
  {
    Rng rng = root.derive("verb");
    for (const auto& v : world.verbs) {
      verb_latent(v.id, v.relation) = 1.0;
      verb_latent(v.id, kRelationCount + v.gesture) = 1.0;
      for (int k = 0; k < kVerbNoiseDims; ++k) verb_latent(v.id, kRelationCount + gestures + k) = rng.normal(0.0, 0.5);
    }
  }
  Rng obj_rng = root.derive("object");
  const Matrix<double> object_latent = gaussian(obj_rng, world.config.n_objects, kObjectDims, 1.0);
  Rng map_rng = root.derive("maps");
  const Matrix<double> A = gaussian(map_rng, verb_dims, config.width, 1.0 / std::sqrt(double(verb_dims)));
  const Matrix<double> B = gaussian(map_rng, kObjectDims, config.width, 1.0 / std::sqrt(double(kObjectDims)));

  const int n_classes = static_cast<int>(world.classes.size());
  GuidanceEmbeddings g;
  g.descriptions.resize(n_classes, config.width);
  Rng noise_rng = root.derive("noise");
  for (const auto& c : world.classes) {
    RowVector<double> row = config.verb_weight * verb_latent.row(c.verb) * A +
                            config.object_weight * object_latent.row(c.object) * B;
    for (Index j = 0; j < row.size(); ++j) row(j) += noise_rng.normal(0.0, config.noise);
    g.descriptions.row(c.id) = row.normalized();
  }

  g.disparities.assign(static_cast<std::size_t>(n_classes), Matrix<double>());
  g.related_seen.assign(static_cast<std::size_t>(n_classes), -1);
  Rng disp_rng = root.derive("disparity");
  for (int u : split.unseen) {
    if (split.seen.empty()) break;
    const int s = select_related_seen(g.descriptions, u, split.seen);
    g.related_seen[static_cast<std::size_t>(u)] = s;
    const auto& cu = world.classes[static_cast<std::size_t>(u)];
    const auto& cs = world.classes[static_cast<std::size_t>(s)];
    const RowVector<double> verb_delta = (verb_latent.row(cu.verb) - verb_latent.row(cs.verb)) * A;
    Matrix<double> rows(config.sentences, config.width);
    for (int k = 0; k < config.sentences; ++k) {
      RowVector<double> context = object_latent.row(cu.object);
      for (Index j = 0; j < context.size(); ++j) context(j) += disp_rng.normal(0.0, 0.5);
      RowVector<double> row = config.verb_weight * verb_delta + 0.3 * config.object_weight * context * B;
      for (Index j = 0; j < row.size(); ++j) row(j) += disp_rng.normal(0.0, 0.05);
      rows.row(k) = row.normalized();
    }
    g.disparities[static_cast<std::size_t>(u)] = std::move(rows);
  }

  const GuidanceStats stats = guidance_stats(world, g);
  if (!(stats.shared_verb > stats.shared_nothing)) {
    throw DatasetError("guidance fixture geometry check failed: shared-verb similarity " +
                       std::to_string(stats.shared_verb) + " <= unrelated " + std::to_string(stats.shared_nothing));
  }
  return g;
}

GuidanceStats guidance_stats(const World& world, const GuidanceEmbeddings& guidance) {
  double sums[3] = {0, 0, 0};
  int counts[3] = {0, 0, 0};
  for (const auto& a : world.classes) {
    for (const auto& b : world.classes) {
      if (a.id >= b.id) continue;
      const bool v = a.verb == b.verb, o = a.object == b.object;
      const int bucket = v && !o ? 0 : (o && !v ? 1 : (!v && !o ? 2 : -1));
      if (bucket < 0) continue;
      sums[bucket] += guidance.descriptions.row(a.id).dot(guidance.descriptions.row(b.id));
      ++counts[bucket];
    }
  }
  auto mean = [&](int k) { return counts[k] ? sums[k] / counts[k] : 0.0; };
  return {mean(0), mean(1), mean(2)};
}

}  // namespace hoi
