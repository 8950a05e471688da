#include "hoiprompt/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "hoiprompt/tensor.hpp"

namespace hoi {

double iou(const Box& a, const Box& b) {
  if (!a.well_formed() || !b.well_formed()) throw DimensionError("iou: malformed box");
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

std::vector<bool> match_predictions(const std::vector<Prediction>& preds, const std::vector<GroundTruthPair>& gts,
                                    double threshold) {
  std::vector<bool> flags(preds.size(), false);
  std::vector<bool> used(gts.size(), false);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    int best = -1;
    double best_overlap = threshold;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double overlap = std::min(iou(preds[i].human, gts[g].human), iou(preds[i].object, gts[g].object));
      if (overlap > best_overlap) {
        best_overlap = overlap;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      flags[i] = true;
    }
  }
  return flags;
}

double average_precision(const std::vector<bool>& tp, int n_gt) {
  if (n_gt <= 0) throw ContractError("average_precision needs at least one ground-truth instance");
  const std::size_t n = tp.size();
  std::vector<double> recall(n + 2, 0.0), precision(n + 2, 0.0);
  double hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    hits += tp[i] ? 1.0 : 0.0;
    recall[i + 1] = hits / n_gt;
    precision[i + 1] = hits / static_cast<double>(i + 1);
  }
  recall[n + 1] = 1.0;
  precision[n + 1] = 0.0;
  for (std::size_t i = n + 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0;
  for (std::size_t i = 0; i + 1 < n + 2; ++i) ap += (recall[i + 1] - recall[i]) * precision[i + 1];
  return ap;
}

void sort_predictions(std::vector<Prediction>& preds) {
  std::stable_sort(preds.begin(), preds.end(), [](const Prediction& a, const Prediction& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.scene != b.scene) return a.scene < b.scene;
    if (a.pair != b.pair) return a.pair < b.pair;
    return a.hoi < b.hoi;
  });
}

EvalReport evaluate(std::vector<Prediction> preds, const World& world, const SplitSpec& split) {
  return evaluate(std::move(preds), world.test_scenes(), world, split);
}

EvalReport evaluate(std::vector<Prediction> preds, const std::vector<const Scene*>& scenes, const World& world,
                    const SplitSpec& split) {
  EvalReport report;
  report.n_predictions = static_cast<int>(preds.size());
  sort_predictions(preds);

  const std::size_t n_classes = world.classes.size();
  // ground truth per class, per scene
  std::vector<std::map<int, std::vector<GroundTruthPair>>> gt(n_classes);
  for (const Scene* s : scenes)
    for (const auto& it : s->interactions) gt[static_cast<std::size_t>(it.hoi)][s->id].push_back({it.human, it.object});

  std::vector<std::vector<const Prediction*>> by_class(n_classes);
  for (const auto& p : preds) {
    if (p.hoi < 0 || p.hoi >= static_cast<int>(n_classes)) throw DatasetError("prediction for unknown class " + std::to_string(p.hoi));
    by_class[static_cast<std::size_t>(p.hoi)].push_back(&p);
  }

  double sum_full = 0, sum_seen = 0, sum_unseen = 0;
  int n_full = 0, n_seen = 0, n_unseen = 0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    ClassResult r;
    r.hoi = static_cast<int>(c);
    r.seen = !split.is_unseen(r.hoi);
    for (const auto& [scene, pairs] : gt[c]) r.n_gt += static_cast<int>(pairs.size());

    // greedy matching runs per scene in global score order
    const auto& ranked = by_class[c];
    std::map<int, std::vector<std::size_t>> positions;
    for (std::size_t k = 0; k < ranked.size(); ++k) positions[ranked[k]->scene].push_back(k);
    std::vector<bool> flags(ranked.size(), false);
    for (const auto& [scene, idx] : positions) {
      auto it = gt[c].find(scene);
      if (it == gt[c].end()) continue;
      std::vector<Prediction> local;
      for (std::size_t k : idx) local.push_back(*ranked[k]);
      const auto local_flags = match_predictions(local, it->second);
      for (std::size_t k = 0; k < idx.size(); ++k) flags[idx[k]] = local_flags[k];
    }
    if (r.n_gt > 0) {
      r.ap = average_precision(flags, r.n_gt);
      sum_full += r.ap;
      ++n_full;
      (r.seen ? sum_seen : sum_unseen) += r.ap;
      ++(r.seen ? n_seen : n_unseen);
    }
    report.classes.push_back(r);
  }
  report.map_full = n_full ? sum_full / n_full : 0.0;
  report.map_seen = n_seen ? sum_seen / n_seen : 0.0;
  report.map_unseen = n_unseen ? sum_unseen / n_unseen : 0.0;
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["map_full"] = map_full;
  j["map_seen"] = map_seen;
  j["map_unseen"] = map_unseen;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& c : classes) per.push_back({{"hoi", c.hoi}, {"seen", c.seen}, {"n_gt", c.n_gt}, {"ap", c.ap}});
  j["per_class"] = per;
  return j.dump(2) + "\n";
}

std::string EvalReport::table() const {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof line, "%-6s %-7s %5s %8s\n", "hoi", "split", "n_gt", "AP");
  out << line;
  for (const auto& c : classes) {
    std::snprintf(line, sizeof line, "%-6d %-7s %5d %8.4f\n", c.hoi, c.seen ? "seen" : "unseen", c.n_gt, c.ap);
    out << line;
  }
  std::snprintf(line, sizeof line, "\nmAP full %.4f  seen %.4f  unseen %.4f\n", map_full, map_seen, map_unseen);
  out << line;
  return out.str();
}

std::string predictions_jsonl(const std::vector<Prediction>& preds) {
  std::string out;
  for (const auto& p : preds) {
    nlohmann::ordered_json j;
    j["scene"] = p.scene;
    j["pair"] = p.pair;
    j["human"] = {p.human.x1, p.human.y1, p.human.x2, p.human.y2};
    j["object"] = {p.object.x1, p.object.y1, p.object.x2, p.object.y2};
    j["hoi"] = p.hoi;
    j["score"] = p.score;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace hoi
