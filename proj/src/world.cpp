#include "hoiprompt/world.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

namespace hoi {

namespace {

struct PixelBox {
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;  // half-open pixel rectangle

  bool intersects(const PixelBox& o, int margin) const {
    return x1 < o.x2 + margin && o.x1 < x2 + margin && y1 < o.y2 + margin && o.y1 < y2 + margin;
  }
  bool inside(int size) const { return x1 >= 0 && y1 >= 0 && x2 <= size && y2 <= size; }
};

using Rgb = std::array<float, 3>;

Rgb hsv(double h, double s, double v) {
  h = h - std::floor(h);
  const double c = v * s;
  const double x = c * (1 - std::abs(std::fmod(h * 6.0, 2.0) - 1));
  const double m = v - c;
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h * 6.0) % 6) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  return {static_cast<float>(r + m), static_cast<float>(g + m), static_cast<float>(b + m)};
}

Rgb gesture_colour(int gesture) {
  static const Rgb base[] = {{0.9f, 0.1f, 0.1f}, {0.1f, 0.8f, 0.2f}, {0.15f, 0.3f, 0.95f}, {0.9f, 0.85f, 0.1f}};
  if (gesture < 4) return base[gesture];
  return hsv(0.13 * gesture + 0.07, 0.9, 0.9);
}

Rgb object_colour(int object) { return hsv(0.1 * object + 0.05, 0.65, 0.75); }

constexpr Rgb kSkin{0.95f, 0.8f, 0.65f};
constexpr Rgb kLegs{0.3f, 0.3f, 0.55f};
constexpr Rgb kArm{1.0f, 1.0f, 1.0f};
constexpr float kBackground = 0.1f;

class Canvas {
 public:
  explicit Canvas(int size) : size_(size), pixels_(static_cast<std::size_t>(size * size * 3), kBackground) {}

  void set(int x, int y, const Rgb& c) {
    if (x < 0 || y < 0 || x >= size_ || y >= size_) return;
    auto* p = &pixels_[static_cast<std::size_t>((y * size_ + x) * 3)];
    p[0] = c[0], p[1] = c[1], p[2] = c[2];
  }
  void fill(int x1, int y1, int x2, int y2, const Rgb& c) {
    for (int y = y1; y < y2; ++y)
      for (int x = x1; x < x2; ++x) set(x, y, c);
  }
  std::vector<float>& pixels() { return pixels_; }

 private:
  int size_;
  std::vector<float> pixels_;
};

PixelBox to_pixels(const Box& b, int g) {
  return {static_cast<int>(std::lround(b.x1 * g)), static_cast<int>(std::lround(b.y1 * g)),
          static_cast<int>(std::lround(b.x2 * g)), static_cast<int>(std::lround(b.y2 * g))};
}

Box to_patch(const PixelBox& p, int g) {
  const double s = 1.0 / g;
  return {p.x1 * s, p.y1 * s, p.x2 * s, p.y2 * s};
}

void draw_human(Canvas& canvas, const PixelBox& b, int gesture, int relation) {
  const int w = b.x2 - b.x1;
  const int h = b.y2 - b.y1;
  const int head = 3;
  const int legs = std::max(2, h / 4);
  canvas.fill(b.x1 + 1, b.y1, b.x2 - 1, b.y1 + head, kSkin);
  canvas.fill(b.x1, b.y1 + head, b.x2, b.y2 - legs, gesture_colour(gesture));
  canvas.fill(b.x1 + 1, b.y2 - legs, b.x1 + w / 2, b.y2, kLegs);
  canvas.fill(b.x1 + w / 2 + 1, b.y2 - legs, b.x2 - 1, b.y2, kLegs);
  const int arm_y = b.y1 + head + 1;
  switch (relation) {
    case 0: canvas.fill(b.x1, arm_y, b.x1 + 3, arm_y + 2, kArm); break;
    case 1: canvas.fill(b.x2 - 3, arm_y, b.x2, arm_y + 2, kArm); break;
    default:
      canvas.fill(b.x1, b.y1, b.x1 + 1, b.y1 + head + 2, kArm);
      canvas.fill(b.x2 - 1, b.y1, b.x2, b.y1 + head + 2, kArm);
      break;
  }
}

void draw_object(Canvas& canvas, const PixelBox& b, int object) {
  const Rgb c = object_colour(object);
  const int w = b.x2 - b.x1;
  const int h = b.y2 - b.y1;
  const double cx = (b.x1 + b.x2 - 1) / 2.0;
  const double cy = (b.y1 + b.y2 - 1) / 2.0;
  for (int y = b.y1; y < b.y2; ++y) {
    for (int x = b.x1; x < b.x2; ++x) {
      const int lx = x - b.x1, ly = y - b.y1;
      bool on = false;
      switch (object % 5) {
        case 0: on = true; break;
        case 1: on = lx < 2 || ly < 2 || lx >= w - 2 || ly >= h - 2; break;
        case 2: on = std::abs(x - cx) < 1.1 || std::abs(y - cy) < 1.1; break;
        case 3: on = ((lx + ly) % 3) != 2; break;
        default: {
          const double r = std::min(w, h) / 2.0;
          on = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
          break;
        }
      }
      if (on) canvas.set(x, y, c);
    }
  }
}

// Human + object layout for one interaction; returns false when it does not fit.
bool place_pair(int size, int relation, const std::vector<PixelBox>& occupied, Rng& rng, PixelBox& human,
                PixelBox& object) {
  for (int attempt = 0; attempt < 60; ++attempt) {
    const int hw = rng.integer(6, 8), hh = rng.integer(10, 12);
    const int os = rng.integer(6, 8);
    human.x1 = rng.integer(0, size - hw);
    human.y1 = rng.integer(0, size - hh);
    human.x2 = human.x1 + hw;
    human.y2 = human.y1 + hh;
    const int torso = human.y1 + hh / 2;
    switch (relation) {
      case 0:
        object.x2 = human.x1 + 1;
        object.x1 = object.x2 - os;
        object.y1 = torso - os / 2 + rng.integer(-1, 1);
        break;
      case 1:
        object.x1 = human.x2 - 1;
        object.x2 = object.x1 + os;
        object.y1 = torso - os / 2 + rng.integer(-1, 1);
        break;
      default:
        object.y2 = human.y1 + 1;
        object.y1 = object.y2 - os;
        object.x1 = (human.x1 + human.x2) / 2 - os / 2 + rng.integer(-1, 1);
        break;
    }
    if (relation != 2) object.y2 = object.y1 + os;
    if (relation == 2) object.x2 = object.x1 + os;
    if (!human.inside(size) || !object.inside(size)) continue;
    bool clash = false;
    for (const auto& o : occupied) clash = clash || o.intersects(human, 1) || o.intersects(object, 1);
    if (!clash) return true;
  }
  return false;
}

bool place_single(int size, const std::vector<PixelBox>& occupied, Rng& rng, PixelBox& box) {
  for (int attempt = 0; attempt < 60; ++attempt) {
    const int os = rng.integer(6, 8);
    box.x1 = rng.integer(0, size - os);
    box.y1 = rng.integer(0, size - os);
    box.x2 = box.x1 + os;
    box.y2 = box.y1 + os;
    bool clash = false;
    for (const auto& o : occupied) clash = clash || o.intersects(box, 2);
    if (!clash) return true;
  }
  return false;
}

std::vector<HoiCategory> choose_classes(const WorldConfig& cfg, Rng& rng) {
  std::vector<int> object_use(static_cast<std::size_t>(cfg.n_objects), 0);
  std::vector<std::vector<int>> per_verb(static_cast<std::size_t>(cfg.n_verbs));
  const int base = cfg.n_hoi / cfg.n_verbs;
  const int extra = cfg.n_hoi % cfg.n_verbs;
  for (int v = 0; v < cfg.n_verbs; ++v) {
    const int want = base + (v < extra ? 1 : 0);
    std::vector<int> order(static_cast<std::size_t>(cfg.n_objects));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return object_use[a] < object_use[b]; });
    for (int k = 0; k < want; ++k) {
      per_verb[v].push_back(order[k]);
      ++object_use[order[k]];
    }
    std::sort(per_verb[v].begin(), per_verb[v].end());
  }
  std::vector<HoiCategory> classes;
  for (int v = 0; v < cfg.n_verbs; ++v) {
    for (int o : per_verb[v]) {
      HoiCategory c;
      c.id = static_cast<int>(classes.size());
      c.verb = v;
      c.object = o;
      classes.push_back(c);
    }
  }
  return classes;
}

}  // namespace

int gesture_count(int n_verbs) { return (n_verbs + kRelationCount - 1) / kRelationCount; }

std::vector<const Scene*> World::train_scenes() const {
  std::vector<const Scene*> out;
  for (const auto& s : scenes)
    if (s.train) out.push_back(&s);
  return out;
}

std::vector<const Scene*> World::test_scenes() const {
  std::vector<const Scene*> out;
  for (const auto& s : scenes)
    if (!s.train) out.push_back(&s);
  return out;
}

int World::find_class(int verb, int object) const {
  for (const auto& c : classes)
    if (c.verb == verb && c.object == object) return c.id;
  return -1;
}

std::vector<float> render_scene(const WorldConfig& config, const std::vector<VerbSpec>& verbs,
                                const std::vector<HoiCategory>& classes, const std::vector<Entity>& entities,
                                const std::vector<Interaction>& interactions, Rng& rng) {
  const int size = config.image_size();
  const int g = config.patch_pixels;
  Canvas canvas(size);
  // humans first so objects overlapping by a pixel stay visible
  for (const auto& it : interactions) {
    const auto& verb = verbs[static_cast<std::size_t>(classes[static_cast<std::size_t>(it.hoi)].verb)];
    draw_human(canvas, to_pixels(it.human, g), verb.gesture, verb.relation);
  }
  for (const auto& e : entities) {
    if (e.category != kHumanCategory) draw_object(canvas, to_pixels(e.box, g), e.category - 1);
  }
  auto& px = canvas.pixels();
  for (auto& p : px) p = std::clamp(p + static_cast<float>(rng.normal(0.0, 0.02)), 0.0f, 1.0f);
  return px;
}

Scene compose_scene(const WorldConfig& config, const std::vector<VerbSpec>& verbs,
                    const std::vector<HoiCategory>& classes, const std::vector<int>& hoi_ids, bool with_distractor,
                    Rng& rng) {
  const int size = config.image_size();
  const int g = config.patch_pixels;
  Scene scene;
  std::vector<PixelBox> occupied;
  for (std::size_t k = 0; k < hoi_ids.size(); ++k) {
    const auto& cls = classes[static_cast<std::size_t>(hoi_ids[k])];
    PixelBox human, object;
    if (!place_pair(size, verbs[static_cast<std::size_t>(cls.verb)].relation, occupied, rng, human, object)) {
      if (k == 0) throw DatasetError("cannot place the primary interaction in a " + std::to_string(size) + "px image");
      continue;
    }
    occupied.push_back(human);
    occupied.push_back(object);
    Interaction it{to_patch(human, g), to_patch(object, g), cls.id};
    scene.interactions.push_back(it);
    scene.entities.push_back({it.human, kHumanCategory});
    scene.entities.push_back({it.object, object_category(cls.object)});
  }
  if (with_distractor) {
    PixelBox box;
    const int object = rng.integer(0, config.n_objects - 1);
    if (place_single(size, occupied, rng, box)) scene.entities.push_back({to_patch(box, g), object_category(object)});
  }
  scene.pixels = render_scene(config, verbs, classes, scene.entities, scene.interactions, rng);
  return scene;
}

std::vector<Detection> oracle_detections(const Scene& scene, const WorldConfig& config, double noise_level, Rng& rng) {
  const double limit = config.patch_grid;
  auto clip_box = [&](Box b) {
    b.x1 = std::clamp(b.x1, 0.0, limit - 0.25);
    b.y1 = std::clamp(b.y1, 0.0, limit - 0.25);
    b.x2 = std::clamp(b.x2, b.x1 + 0.25, limit);
    b.y2 = std::clamp(b.y2, b.y1 + 0.25, limit);
    return b;
  };
  std::vector<Detection> out;
  for (const auto& e : scene.entities) {
    Detection d;
    d.category = e.category;
    if (noise_level <= 0.0) {
      d.box = e.box;
      d.score = 1.0;
    } else {
      const double sx = 0.1 * noise_level * e.box.width();
      const double sy = 0.1 * noise_level * e.box.height();
      Box b = e.box;
      b.x1 += rng.normal(0, sx);
      b.x2 += rng.normal(0, sx);
      b.y1 += rng.normal(0, sy);
      b.y2 += rng.normal(0, sy);
      d.box = clip_box(b);
      d.score = 1.0 - noise_level * rng.uniform();
    }
    out.push_back(d);
  }
  if (noise_level > 0.0) {
    std::poisson_distribution<int> count(false_positive_rate(noise_level));
    const int n_fp = count(rng.engine());
    for (int k = 0; k < n_fp; ++k) {
      Detection d;
      const double w = rng.uniform(1.5, 2.5), h = rng.uniform(1.5, 2.5);
      const double x = rng.uniform(0.0, limit - w), y = rng.uniform(0.0, limit - h);
      d.box = clip_box({x, y, x + w, y + h});
      d.category = rng.bernoulli(0.3) ? kHumanCategory : object_category(rng.integer(0, config.n_objects - 1));
      d.score = 0.6 * (1.0 - noise_level * rng.uniform());
      out.push_back(d);
    }
  }
  return out;
}

World generate_world(const WorldConfig& config) {
  if (config.n_verbs < 1 || config.n_objects < 1 || config.n_hoi < 1) throw DatasetError("world needs verbs, objects and classes");
  if (config.n_hoi > config.n_verbs * config.n_objects) {
    throw DatasetError("infeasible world: " + std::to_string(config.n_hoi) + " classes > " +
                       std::to_string(config.n_verbs) + " verbs x " + std::to_string(config.n_objects) + " objects");
  }
  if (config.n_hoi < config.n_verbs) throw DatasetError("infeasible world: every verb needs at least one class");
  if (config.n_train < 1 || config.n_test < 1) throw DatasetError("world needs train and test scenes");

  World world;
  world.config = config;
  Rng root(config.seed);
  const int gestures = gesture_count(config.n_verbs);
  for (int v = 0; v < config.n_verbs; ++v) world.verbs.push_back({v, v % kRelationCount, (v / kRelationCount) % gestures});
  // verb ids carry no attribute order
  {
    Rng rng = root.derive("verbs");
    std::vector<VerbSpec> shuffled = world.verbs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng.engine());
    for (int v = 0; v < config.n_verbs; ++v) {
      world.verbs[v].relation = shuffled[v].relation;
      world.verbs[v].gesture = shuffled[v].gesture;
    }
  }
  {
    Rng rng = root.derive("classes");
    world.classes = choose_classes(config, rng);
  }
  const int n_classes = static_cast<int>(world.classes.size());

  // Zipf popularity over a random class ranking
  std::vector<double> zipf(static_cast<std::size_t>(n_classes));
  {
    Rng rng = root.derive("zipf");
    std::vector<int> rank(static_cast<std::size_t>(n_classes));
    std::iota(rank.begin(), rank.end(), 0);
    std::shuffle(rank.begin(), rank.end(), rng.engine());
    for (int c = 0; c < n_classes; ++c) zipf[c] = 1.0 / std::pow(rank[c] + 1.0, config.zipf_exponent);
  }

  const int total = config.n_train + config.n_test;
  world.scenes.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    const bool train = i < config.n_train;
    Rng rng = root.derive("scene").derive(static_cast<std::uint64_t>(i));
    auto draw = [&]() {
      if (train) {
        std::discrete_distribution<int> dist(zipf.begin(), zipf.end());
        return dist(rng.engine());
      }
      return rng.integer(0, n_classes - 1);
    };
    std::vector<int> ids;
    const int test_index = i - config.n_train;
    ids.push_back(!train && test_index < n_classes ? test_index : draw());
    if (rng.bernoulli(config.second_pair_prob)) ids.push_back(draw());
    const bool distractor = rng.bernoulli(config.distractor_prob);
    Scene scene = compose_scene(config, world.verbs, world.classes, ids, distractor, rng);
    scene.id = i;
    scene.train = train;
    Rng det_rng = rng.derive("detections");
    scene.detections = oracle_detections(scene, config, config.detector_noise, det_rng);
    if (train) {
      for (const auto& it : scene.interactions) ++world.classes[static_cast<std::size_t>(it.hoi)].train_count;
    }
    world.scenes.push_back(std::move(scene));
  }
  return world;
}

WorldStats world_stats(const World& world) {
  WorldStats stats;
  std::vector<int> test_counts(world.classes.size(), 0);
  for (const auto& s : world.scenes) {
    for (const auto& it : s.interactions) {
      if (s.train) {
        ++stats.train_interactions;
      } else {
        ++stats.test_interactions;
        ++test_counts[static_cast<std::size_t>(it.hoi)];
      }
    }
  }
  for (const auto& c : world.classes)
    if (c.train_count < 10) ++stats.rare_classes;
  stats.min_test_per_class = test_counts.empty() ? 0 : *std::min_element(test_counts.begin(), test_counts.end());
  return stats;
}

}  // namespace hoi
