#pragma once

// Run configuration: key=value text, every field has a default, CLI flags
// override file values. One struct is shared by all commands.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hoiprompt/split.hpp"
#include "hoiprompt/world.hpp"

namespace hoi {

struct Toggles {
  bool intra_fusion = true;
  bool visual_adapter = true;
  bool llm_guide = true;
  bool utpl = true;
  bool inter_fusion = true;
  bool vlm_guide = true;

  bool operator==(const Toggles&) const = default;
};

inline constexpr std::array<const char*, 6> kToggleNames = {"intra_fusion", "inter_fusion", "visual_adapter",
                                                             "llm_guide",    "utpl",         "vlm_guide"};

/// Cumulative ablation ladder: row 0 is the plain prompt baseline, each row
/// adds one feature in the order intra, adapter, llm, utpl, inter, vlm.
Toggles ablation_row(int row);
inline constexpr int kAblationRows = 7;
const char* ablation_label(int row);

struct RunConfig {
  // paths
  std::string data_dir;
  std::string out_dir = "run";
  std::string checkpoint;

  // world
  WorldConfig world;
  SplitMode mode = SplitMode::UnseenVerb;
  double unseen_fraction = -1;  // < 0: mode default
  int disparity_sentences = 3;
  double guidance_verb_weight = 1.0;
  double guidance_object_weight = 0.8;
  double guidance_noise = 0.1;

  // encoders
  int d_v = 48, d_t = 32, d_a = 32;
  int layers = 12;
  int visual_heads = 4, text_heads = 4;
  int mlp_ratio = 4;
  double residual_gain = 0.5;
  int pretrain_steps = 300;
  int pretrain_scenes_per_class = 8;
  double pretrain_consistency = 150.0;  // weight of the description-consistency term

  // prompts and head
  int prompt_tokens = 2;  // p
  int prompt_depth = 9;   // N
  int adapter_rank = 8;
  int intra_hidden = 64;
  int inter_heads = 2;
  double theta = 0.2;
  double logit_scale = 20.0;
  bool sigmoid_on_logits = true;

  // loss and optimisation
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double relation_weight = 150.0;
  double tau_train = 1.0;
  double tau_infer = 2.8;
  double lr = 1e-3;
  double weight_decay = 1e-2;
  int batch_size = 16;
  int epochs = 15;
  int warmup_steps = 0;
  int patience = 3;            // epochs without seen-validation gain before stopping; 0 disables
  int validation_scenes = 120;

  std::uint64_t seed = 1;
  int precision = 32;
  Toggles toggles;

  double resolved_unseen_fraction() const { return unseen_fraction < 0 ? default_unseen_fraction(mode) : unseen_fraction; }

  /// Sets one field from text; throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Canonical key=value dump of every field, sorted by key.
  std::string dump() const;
  /// Hash of the fields that determine model shape and behaviour (paths and epoch count excluded).
  std::string model_hash() const;
  /// Validates cross-field constraints.
  void validate() const;
};

RunConfig load_config_file(const std::string& path, RunConfig base = {});
void set_toggle(Toggles& t, const std::string& name, bool on);
bool get_toggle(const Toggles& t, const std::string& name);

}  // namespace hoi
