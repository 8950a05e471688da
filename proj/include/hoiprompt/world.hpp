#pragma once

// Synthetic human-object interaction world: verbs are rendered as a torso
// gesture colour plus a spatial relation between a human glyph and an object
// glyph; objects are shape + colour codes. Everything is derived from one seed.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hoiprompt/util.hpp"

namespace hoi {

/// Axis-aligned box in patch coordinates (one unit = one encoder patch).
struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool well_formed() const { return x1 < x2 && y1 < y2; }
  bool operator==(const Box&) const = default;
};

inline constexpr int kHumanCategory = 0;

/// Detector category of object id `o` (0 is reserved for humans).
inline int object_category(int object_id) { return object_id + 1; }

struct VerbSpec {
  int id = 0;
  int relation = 0;  // 0: object left of the human, 1: right, 2: above
  int gesture = 0;   // torso colour code
};

struct HoiCategory {
  int id = 0;
  int verb = 0;
  int object = 0;
  bool seen = true;
  int train_count = 0;
};

struct Interaction {
  Box human;
  Box object;
  int hoi = 0;
};

struct Entity {
  Box box;
  int category = 0;  // kHumanCategory or object_category(o)
};

struct Detection {
  Box box;
  int category = 0;
  double score = 1.0;
};

struct Scene {
  int id = 0;
  bool train = true;
  std::vector<float> pixels;  // height x width x 3, row-major
  std::vector<Entity> entities;
  std::vector<Interaction> interactions;
  std::vector<Detection> detections;
};

struct WorldConfig {
  std::uint64_t seed = 7;
  int n_verbs = 12;
  int n_objects = 10;
  int n_hoi = 60;
  int n_train = 800;
  int n_test = 200;
  int patch_grid = 7;    // d_p
  int patch_pixels = 4;  // g
  double zipf_exponent = 0.6;
  double detector_noise = 0.1;
  double second_pair_prob = 0.3;
  double distractor_prob = 0.5;

  int image_size() const { return patch_grid * patch_pixels; }
  int patch_dim() const { return patch_pixels * patch_pixels * 3; }
};

struct World {
  WorldConfig config;
  std::vector<VerbSpec> verbs;
  std::vector<HoiCategory> classes;
  std::vector<Scene> scenes;  // train scenes first, then test, ids ascending

  std::vector<const Scene*> train_scenes() const;
  std::vector<const Scene*> test_scenes() const;
  /// Class id for (verb, object) or -1.
  int find_class(int verb, int object) const;
};

/// Raised for infeasible world parameters or violated dataset preconditions.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

World generate_world(const WorldConfig& config);

/// Number of distinct gesture codes used for `n_verbs` verbs.
int gesture_count(int n_verbs);
inline constexpr int kRelationCount = 3;

/// Renders entities into an RGB image (exposed for tests and pretraining corpora).
std::vector<float> render_scene(const WorldConfig& config, const std::vector<VerbSpec>& verbs,
                                const std::vector<HoiCategory>& classes, const std::vector<Entity>& entities,
                                const std::vector<Interaction>& interactions, Rng& rng);

/// Lays out one scene containing the given interaction classes (first is mandatory, others best effort).
Scene compose_scene(const WorldConfig& config, const std::vector<VerbSpec>& verbs,
                    const std::vector<HoiCategory>& classes, const std::vector<int>& hoi_ids, bool with_distractor,
                    Rng& rng);

/// Detector stand-in: jittered ground-truth boxes plus injected false positives.
std::vector<Detection> oracle_detections(const Scene& scene, const WorldConfig& config, double noise_level, Rng& rng);

/// Expected number of false positives per scene at a given noise level.
inline double false_positive_rate(double noise_level) { return 0.5 * noise_level; }

struct WorldStats {
  int train_interactions = 0;
  int test_interactions = 0;
  int rare_classes = 0;       // fewer than 10 training instances
  int min_test_per_class = 0;
};

WorldStats world_stats(const World& world);

}  // namespace hoi
