#include "hoiprompt/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace hoi {

std::string to_string(SplitMode mode) {
  switch (mode) {
    case SplitMode::UnseenVerb: return "uv";
    case SplitMode::UnseenObject: return "uo";
    case SplitMode::RareFirst: return "rfuc";
    case SplitMode::NonRareFirst: return "nfuc";
  }
  return "uv";
}

std::optional<SplitMode> parse_split_mode(const std::string& text) {
  for (auto m : {SplitMode::UnseenVerb, SplitMode::UnseenObject, SplitMode::RareFirst, SplitMode::NonRareFirst})
    if (to_string(m) == text) return m;
  return std::nullopt;
}

double default_unseen_fraction(SplitMode mode) {
  return mode == SplitMode::UnseenVerb || mode == SplitMode::UnseenObject ? 0.25 : 0.2;
}

bool SplitSpec::is_unseen(int hoi) const { return std::binary_search(unseen.begin(), unseen.end(), hoi); }

namespace {

SplitSpec finish(const World& world, SplitMode mode, std::set<int> unseen) {
  SplitSpec split;
  split.mode = mode;
  for (const auto& c : world.classes) (unseen.count(c.id) ? split.unseen : split.seen).push_back(c.id);
  return split;
}

// Every verb and object of the world still occurs in some seen class.
bool attributes_covered(const World& world, const std::set<int>& unseen, bool verbs, bool objects) {
  std::set<int> v, o;
  for (const auto& c : world.classes) {
    if (unseen.count(c.id)) continue;
    v.insert(c.verb);
    o.insert(c.object);
  }
  return (!verbs || static_cast<int>(v.size()) == world.config.n_verbs) &&
         (!objects || static_cast<int>(o.size()) == world.config.n_objects);
}

std::set<int> attribute_split(const World& world, bool by_verb, int count, Rng& rng) {
  const int n = by_verb ? world.config.n_verbs : world.config.n_objects;
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  std::set<int> unseen;
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::shuffle(ids.begin(), ids.end(), rng.engine());
    std::set<int> chosen(ids.begin(), ids.begin() + count);
    unseen.clear();
    for (const auto& c : world.classes)
      if (chosen.count(by_verb ? c.verb : c.object)) unseen.insert(c.id);
    // the complementary attribute must stay observable in training
    if (attributes_covered(world, unseen, !by_verb, by_verb)) return unseen;
  }
  return unseen;
}

std::set<int> composition_split(const World& world, bool rare, int count, Rng& rng) {
  std::vector<int> pool;
  for (const auto& c : world.classes) {
    if (rare ? c.train_count < kRareThreshold : c.train_count > kRareThreshold) pool.push_back(c.id);
  }
  std::shuffle(pool.begin(), pool.end(), rng.engine());
  std::set<int> unseen;
  for (int id : pool) {
    if (static_cast<int>(unseen.size()) == count) break;
    unseen.insert(id);
    if (!attributes_covered(world, unseen, true, true)) unseen.erase(id);
  }
  if (static_cast<int>(unseen.size()) < count) {
    throw DatasetError(std::string("insufficient ") + (rare ? "rare" : "non-rare") + " classes: need " +
                       std::to_string(count) + ", found " + std::to_string(pool.size()) + " candidates of which " +
                       std::to_string(unseen.size()) + " keep every verb and object seen");
  }
  return unseen;
}

}  // namespace

SplitSpec make_split(const World& world, SplitMode mode, double unseen_fraction, std::uint64_t seed) {
  if (unseen_fraction < 0.0 || unseen_fraction >= 1.0) {
    throw DatasetError("unseen fraction must lie in [0, 1), got " + std::to_string(unseen_fraction));
  }
  Rng rng = Rng(seed).derive("split").derive(to_string(mode));
  const auto n_classes = static_cast<double>(world.classes.size());
  switch (mode) {
    case SplitMode::UnseenVerb: {
      const int n = static_cast<int>(std::lround(unseen_fraction * world.config.n_verbs));
      return finish(world, mode, n == 0 ? std::set<int>{} : attribute_split(world, true, n, rng));
    }
    case SplitMode::UnseenObject: {
      const int n = static_cast<int>(std::lround(unseen_fraction * world.config.n_objects));
      return finish(world, mode, n == 0 ? std::set<int>{} : attribute_split(world, false, n, rng));
    }
    case SplitMode::RareFirst:
    case SplitMode::NonRareFirst: {
      const int n = static_cast<int>(std::lround(unseen_fraction * n_classes));
      return finish(world, mode, n == 0 ? std::set<int>{} : composition_split(world, mode == SplitMode::RareFirst, n, rng));
    }
  }
  return finish(world, mode, {});
}

std::vector<std::string> split_violations(const World& world, const SplitSpec& split) {
  std::vector<std::string> out;
  std::set<int> seen_verbs, seen_objects;
  for (int id : split.seen) {
    seen_verbs.insert(world.classes[static_cast<std::size_t>(id)].verb);
    seen_objects.insert(world.classes[static_cast<std::size_t>(id)].object);
  }
  if (split.seen.size() + split.unseen.size() != world.classes.size()) out.push_back("seen and unseen do not cover C");
  for (int id : split.unseen) {
    if (std::binary_search(split.seen.begin(), split.seen.end(), id)) out.push_back("class " + std::to_string(id) + " both seen and unseen");
    const auto& c = world.classes[static_cast<std::size_t>(id)];
    const std::string who = "unseen class " + std::to_string(id) + ": ";
    switch (split.mode) {
      case SplitMode::UnseenVerb:
        if (seen_verbs.count(c.verb)) out.push_back(who + "verb " + std::to_string(c.verb) + " occurs in a seen class");
        break;
      case SplitMode::UnseenObject:
        if (seen_objects.count(c.object)) out.push_back(who + "object " + std::to_string(c.object) + " occurs in a seen class");
        break;
      case SplitMode::RareFirst:
      case SplitMode::NonRareFirst: {
        const bool rare = split.mode == SplitMode::RareFirst;
        if (rare ? c.train_count >= kRareThreshold : c.train_count <= kRareThreshold)
          out.push_back(who + "training count " + std::to_string(c.train_count) + (rare ? " is not rare" : " is not non-rare"));
        if (!seen_verbs.count(c.verb)) out.push_back(who + "verb unseen");
        if (!seen_objects.count(c.object)) out.push_back(who + "object unseen");
        break;
      }
    }
  }
  return out;
}

std::vector<const Scene*> training_scenes(const World& world, const SplitSpec& split) {
  std::vector<const Scene*> out;
  for (const Scene* s : world.train_scenes()) {
    bool clean = true;
    for (const auto& it : s->interactions) clean = clean && !split.is_unseen(it.hoi);
    if (clean) out.push_back(s);
  }
  return out;
}

void apply_split(World& world, const SplitSpec& split) {
  for (auto& c : world.classes) c.seen = !split.is_unseen(c.id);
}

}  // namespace hoi
