#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "hoiprompt/dataset_io.hpp"
#include "hoiprompt/eval.hpp"
#include "oracles.hpp"

using namespace hoi;
namespace fs = std::filesystem;

namespace {

const World& default_world() {
  static const World w = generate_world(WorldConfig{});
  return w;
}

WorldConfig small_config() {
  WorldConfig c;
  c.n_verbs = 4;
  c.n_objects = 3;
  c.n_hoi = 8;
  c.n_train = 60;
  c.n_test = 20;
  return c;
}

std::string temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hoiprompt_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

bool box_inside(const Box& b, double side) { return b.well_formed() && b.x1 >= 0 && b.y1 >= 0 && b.x2 <= side && b.y2 <= side; }

}  // namespace

TEST_CASE("default world matches the desk configuration") {
  const World& w = default_world();
  CHECK(w.verbs.size() == 12);
  CHECK(w.classes.size() == 60);
  CHECK(w.train_scenes().size() == 800);
  CHECK(w.test_scenes().size() == 200);
  std::set<std::pair<int, int>> pairs;
  for (const auto& c : w.classes) pairs.insert({c.verb, c.object});
  CHECK(pairs.size() == 60);

  const WorldStats stats = world_stats(w);
  CHECK(stats.min_test_per_class >= 1);
  // long tail: at least 15% of the classes are rare
  CHECK(stats.rare_classes >= 9);
  std::vector<int> counts(w.classes.size(), 0);
  for (const Scene* s : w.train_scenes())
    for (const auto& it : s->interactions) ++counts[static_cast<std::size_t>(it.hoi)];
  for (const auto& c : w.classes) CHECK(counts[static_cast<std::size_t>(c.id)] == c.train_count);
}

TEST_CASE("scenes are well formed") {
  const World& w = default_world();
  const double side = w.config.patch_grid;
  for (const auto& s : w.scenes) {
    REQUIRE(s.pixels.size() == static_cast<std::size_t>(w.config.image_size() * w.config.image_size() * 3));
    REQUIRE_FALSE(s.interactions.empty());
    for (const auto& it : s.interactions) {
      CHECK(box_inside(it.human, side));
      CHECK(box_inside(it.object, side));
    }
    for (const auto& d : s.detections) {
      CHECK(d.box.well_formed());
      CHECK(d.score > 0.0);
      CHECK(d.score <= 1.0);
    }
  }
}

TEST_CASE("world generation is deterministic per seed") {
  const World a = generate_world(small_config());
  const World b = generate_world(small_config());
  WorldConfig other = small_config();
  other.seed = 99;
  const World c = generate_world(other);
  const std::string da = temp_dir("det_a"), db = temp_dir("det_b"), dc = temp_dir("det_c");
  CHECK(save_world(da, a) == save_world(db, b));
  CHECK(save_world(da, a) != save_world(dc, c));
}

TEST_CASE("infeasible worlds are rejected") {
  WorldConfig c = small_config();
  c.n_hoi = c.n_verbs * c.n_objects + 1;
  CHECK_THROWS_AS(generate_world(c), DatasetError);
  c = small_config();
  c.n_hoi = 2;  // fewer classes than verbs
  CHECK_THROWS_AS(generate_world(c), DatasetError);
}

TEST_CASE("oracle detections: exact at zero noise, bounded jitter and false-positive rate at 0.3") {
  const World& w = default_world();
  Rng rng(5);
  const Scene& s = *w.test_scenes().front();
  const auto exact = oracle_detections(s, w.config, 0.0, rng);
  REQUIRE(exact.size() == s.entities.size());
  for (std::size_t i = 0; i < exact.size(); ++i) {
    CHECK(exact[i].box == s.entities[i].box);
    CHECK(exact[i].score == 1.0);
  }

  double iou_sum = 0;
  int boxes = 0, false_positives = 0, scenes = 0;
  for (int round = 0; boxes < 1000 || scenes < 2000; ++round) {
    for (const auto& scene : w.scenes) {
      const auto dets = oracle_detections(scene, w.config, 0.3, rng);
      ++scenes;
      for (std::size_t i = 0; i < dets.size(); ++i) {
        if (i < scene.entities.size()) {
          iou_sum += iou(dets[i].box, scene.entities[i].box);
          ++boxes;
        } else {
          ++false_positives;
        }
      }
    }
  }
  CHECK(iou_sum / boxes >= 0.6);
  const double expected = false_positive_rate(0.3) * scenes;
  CHECK(false_positives >= 0.8 * expected);
  CHECK(false_positives <= 1.2 * expected);
}

TEST_CASE("split predicates hold for every mode") {
  const World& w = default_world();
  for (SplitMode mode : {SplitMode::UnseenVerb, SplitMode::UnseenObject, SplitMode::RareFirst, SplitMode::NonRareFirst}) {
    CAPTURE(to_string(mode));
    const SplitSpec split = make_split(w, mode, default_unseen_fraction(mode), 7);
    CHECK_FALSE(split.unseen.empty());
    CHECK(split.seen.size() + split.unseen.size() == w.classes.size());
    CHECK(split_violations(w, split).empty());

    std::set<int> seen_verbs, seen_objects;
    for (int c : split.seen) {
      seen_verbs.insert(w.classes[static_cast<std::size_t>(c)].verb);
      seen_objects.insert(w.classes[static_cast<std::size_t>(c)].object);
    }
    for (int u : split.unseen) {
      const auto& c = w.classes[static_cast<std::size_t>(u)];
      switch (mode) {
        case SplitMode::UnseenVerb:
          CHECK(seen_verbs.count(c.verb) == 0);
          break;
        case SplitMode::UnseenObject:
          CHECK(seen_objects.count(c.object) == 0);
          break;
        case SplitMode::RareFirst:
          CHECK(c.train_count < kRareThreshold);
          CHECK(seen_verbs.count(c.verb) == 1);
          CHECK(seen_objects.count(c.object) == 1);
          break;
        case SplitMode::NonRareFirst:
          CHECK(c.train_count >= kRareThreshold);
          CHECK(seen_verbs.count(c.verb) == 1);
          CHECK(seen_objects.count(c.object) == 1);
          break;
      }
    }
    for (const Scene* s : training_scenes(w, split))
      for (const auto& it : s->interactions) CHECK_FALSE(split.is_unseen(it.hoi));
  }
}

TEST_CASE("split edge cases") {
  const World& w = default_world();
  CHECK(make_split(w, SplitMode::UnseenVerb, 0.0, 1).unseen.empty());
  CHECK(make_split(w, SplitMode::RareFirst, 0.0, 1).unseen.empty());
  CHECK_THROWS_AS(make_split(w, SplitMode::RareFirst, 0.9, 1), DatasetError);
  CHECK(parse_split_mode("nfuc") == SplitMode::NonRareFirst);
  CHECK_FALSE(parse_split_mode("xx").has_value());

  SplitSpec bad = make_split(w, SplitMode::UnseenVerb, 0.25, 1);
  bad.unseen.push_back(bad.seen.back());  // a class whose verb is still seen
  bad.seen.pop_back();
  CHECK_FALSE(split_violations(w, bad).empty());
}

TEST_CASE("select_related_seen agrees with an exhaustive scan") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    Matrix<double> d(16, 5);
    for (Index i = 0; i < d.size(); ++i) d.data()[i] = static_cast<double>(rng.integer(-3, 3));  // coarse grid forces ties
    std::vector<int> seen;
    for (int c = 0; c < 16; ++c)
      if (rng.bernoulli(0.6)) seen.push_back(c);
    if (seen.empty()) seen.push_back(rng.integer(0, 15));
    const int u = rng.integer(0, 15);

    CHECK(select_related_seen(d, u, seen) == oracle::related_seen(d, u, seen));
  }
}

TEST_CASE("select_related_seen special cases") {
  Matrix<double> d(4, 2);
  d << 1, 0, 0, 1, 1, 0, 0.6, 0.8;
  CHECK(select_related_seen(d, 0, {1, 2, 3}) == 2);  // duplicate row wins
  Matrix<double> tie(3, 2);
  tie << 1, 0, 0.5, 0.5, 0.5, 0.5;
  CHECK(select_related_seen(tie, 0, {2, 1}) == 1);  // lower id on ties
  CHECK_THROWS_AS(select_related_seen(d, 0, {}), DatasetError);
}

TEST_CASE("guidance fixtures") {
  const World& w = default_world();
  const SplitSpec split = make_split(w, SplitMode::UnseenVerb, 0.25, 7);
  GuidanceConfig cfg;
  const GuidanceEmbeddings g = build_guidance_fixtures(w, split, cfg, 7);
  REQUIRE(g.classes() == 60);
  CHECK(g.width() == cfg.width);
  for (Index c = 0; c < g.descriptions.rows(); ++c) CHECK(g.descriptions.row(c).norm() == doctest::Approx(1.0).epsilon(1e-9));
  for (int c = 0; c < g.classes(); ++c) {
    const auto idx = static_cast<std::size_t>(c);
    if (split.is_unseen(c)) {
      CHECK(g.disparities[idx].rows() == cfg.sentences);
      CHECK(g.disparities[idx].cols() == cfg.width);
      for (Index r = 0; r < g.disparities[idx].rows(); ++r)
        CHECK(g.disparities[idx].row(r).norm() == doctest::Approx(1.0).epsilon(1e-9));
      CHECK_FALSE(split.is_unseen(g.related_seen[idx]));
      CHECK(g.related_seen[idx] == select_related_seen(g.descriptions, c, split.seen));
    } else {
      CHECK(g.disparities[idx].size() == 0);
      CHECK(g.related_seen[idx] == -1);
    }
  }
  const GuidanceStats stats = guidance_stats(w, g);
  CHECK(stats.shared_verb > stats.shared_nothing);
  CHECK(stats.shared_object > stats.shared_nothing);

  const GuidanceEmbeddings again = build_guidance_fixtures(w, split, cfg, 7);
  CHECK(again.descriptions == g.descriptions);
}

TEST_CASE("world, split and guidance files round-trip") {
  const World w = generate_world(small_config());
  const std::string dir = temp_dir("roundtrip");
  const std::string checksum = save_world(dir, w);
  CHECK(world_checksum(dir) == checksum);
  const World back = load_world(dir);
  REQUIRE(back.scenes.size() == w.scenes.size());
  for (std::size_t i = 0; i < w.scenes.size(); ++i) {
    CHECK(back.scenes[i].pixels == w.scenes[i].pixels);
    CHECK(back.scenes[i].interactions.size() == w.scenes[i].interactions.size());
    CHECK(back.scenes[i].detections.size() == w.scenes[i].detections.size());
    for (std::size_t k = 0; k < w.scenes[i].detections.size(); ++k) {
      CHECK(back.scenes[i].detections[k].box == w.scenes[i].detections[k].box);
      CHECK(back.scenes[i].detections[k].score == w.scenes[i].detections[k].score);
    }
  }
  CHECK(back.classes.size() == w.classes.size());
  CHECK(save_world(temp_dir("roundtrip2"), back) == checksum);

  const SplitSpec split = make_split(w, SplitMode::UnseenVerb, 0.25, 3);
  const std::string split_path = dir + "/split.json";
  save_split(split_path, split);
  const SplitSpec split_back = load_split(split_path);
  CHECK(split_back.mode == split.mode);
  CHECK(split_back.seen == split.seen);
  CHECK(split_back.unseen == split.unseen);

  GuidanceConfig gc;
  gc.width = 8;
  const GuidanceEmbeddings g = build_guidance_fixtures(w, split, gc, 3);
  const std::string gpath = dir + "/guidance.jsonl";
  save_guidance(gpath, g);
  const GuidanceEmbeddings g_back = load_guidance(gpath);
  CHECK(g_back.descriptions == g.descriptions);
  CHECK(g_back.related_seen == g.related_seen);
  for (std::size_t c = 0; c < g.disparities.size(); ++c) CHECK(g_back.disparities[c] == g.disparities[c]);
}

TEST_CASE("corrupted files are refused with both checksums") {
  const World w = generate_world(small_config());
  const std::string dir = temp_dir("corrupt");
  save_world(dir, w);
  {
    std::string text = read_file(dir + "/scenes.jsonl");
    const auto pos = text.find("\"hoi\":") + 6;
    text[pos] = text[pos] == '1' ? '2' : '1';
    std::ofstream(dir + "/scenes.jsonl", std::ios::binary) << text;
  }
  try {
    load_world(dir);
    FAIL("corruption went unnoticed");
  } catch (const ChecksumError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("recorded") != std::string::npos);
    CHECK(msg.find("computed") != std::string::npos);
  }

  const SplitSpec split = make_split(w, SplitMode::UnseenVerb, 0.25, 3);
  save_split(dir + "/split.json", split);
  std::string text = read_file(dir + "/split.json");
  const auto pos = text.find("\"seen\"");
  REQUIRE(pos != std::string::npos);
  const auto digit = text.find_first_of("0123456789", pos);
  text[digit] = text[digit] == '7' ? '8' : '7';
  std::ofstream(dir + "/split.json", std::ios::binary) << text;
  CHECK_THROWS_AS(load_split(dir + "/split.json"), ChecksumError);
}
