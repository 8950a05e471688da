#pragma once

// Small worlds and models shared by the model, training and acceptance tests.

#include <memory>

#include "hoiprompt/guidance.hpp"
#include "hoiprompt/model.hpp"

namespace hoi::testing {

inline RunConfig small_run_config() {
  RunConfig c;
  c.world.n_verbs = 4;
  c.world.n_objects = 3;
  c.world.n_hoi = 8;
  c.world.n_train = 40;
  c.world.n_test = 16;
  c.d_v = 16;
  c.d_t = 8;
  c.d_a = 8;
  c.layers = 4;
  c.visual_heads = 2;
  c.text_heads = 2;
  c.mlp_ratio = 2;
  c.prompt_depth = 3;
  c.adapter_rank = 4;
  c.intra_hidden = 16;
  c.inter_heads = 1;
  c.batch_size = 4;
  c.precision = 64;
  return c;
}

/// World, split, guidance and a randomly initialised (not pretrained) encoder.
struct SmallSetup {
  RunConfig config;
  World world;
  SplitSpec split;
  GuidanceEmbeddings guidance;
  std::shared_ptr<const FrozenEncoders<double>> encoders;

  explicit SmallSetup(RunConfig c = small_run_config()) : config(std::move(c)) {
    world = generate_world(config.world);
    split = make_split(world, config.mode, config.resolved_unseen_fraction(), config.world.seed);
    GuidanceConfig g;
    g.width = config.d_t;
    g.sentences = config.disparity_sentences;
    guidance = build_guidance_fixtures(world, split, g, config.world.seed);
    encoders = std::make_shared<const FrozenEncoders<double>>(encoder_dims(config), config.world.seed);
  }

  HoiModel<double> model(const Toggles& toggles = {}) const {
    RunConfig c = config;
    c.toggles = toggles;
    return HoiModel<double>(c, encoders, world, split, guidance);
  }
};

/// Gives every zero-initialised up-projection random values so the guided paths become non-trivial.
inline void randomize_up(HoiModel<double>& model, std::uint64_t seed, double scale = 0.3) {
  Rng rng(seed);
  for (auto& p : model.params().params()) {
    const auto& n = p.name;
    if (n.size() > 3 && n.compare(n.size() - 3, 3, ".up") == 0) p.tensor.mutable_value() = init::normal<double>(rng, p.tensor.rows(), p.tensor.cols(), scale);
  }
}

inline double max_abs_diff(const Matrix<double>& a, const Matrix<double>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return 1e300;
  return a.size() ? (a - b).cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace hoi::testing
