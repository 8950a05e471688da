#pragma once

// Detection-style evaluation of interaction predictions: a prediction is a
// true positive when its class matches and both boxes overlap an unmatched
// ground-truth pair with IoU above 0.5; AP is the all-point interpolated area
// under the precision envelope.

#include <string>
#include <vector>

#include "hoiprompt/split.hpp"
#include "hoiprompt/world.hpp"

namespace hoi {

inline constexpr double kMatchIou = 0.5;

/// Intersection over union; throws DimensionError for malformed boxes.
double iou(const Box& a, const Box& b);

struct Prediction {
  int scene = 0;
  int pair = 0;  // index of the pair within the scene, used as a tiebreak
  Box human, object;
  int hoi = 0;
  double score = 0;
};

struct GroundTruthPair {
  Box human, object;
};

/// Greedy matching in the given order (callers sort by score). Returns one
/// flag per prediction: true for a match against a still-unmatched GT pair
/// where min(IoU_human, IoU_object) > threshold. Each prediction takes the
/// unmatched GT with the largest min-IoU.
std::vector<bool> match_predictions(const std::vector<Prediction>& preds, const std::vector<GroundTruthPair>& gts,
                                    double threshold = kMatchIou);

/// All-point interpolated AP from flags ordered by descending score.
double average_precision(const std::vector<bool>& tp, int n_gt);

/// Canonical ranking order: score descending, then scene id, then pair index, then class.
void sort_predictions(std::vector<Prediction>& preds);

struct ClassResult {
  int hoi = 0;
  bool seen = true;
  int n_gt = 0;
  double ap = 0;
};

struct EvalReport {
  std::vector<ClassResult> classes;  // every class, in id order
  double map_full = 0, map_seen = 0, map_unseen = 0;
  int n_predictions = 0;

  std::string to_json() const;
  std::string table() const;
};

/// Evaluates predictions against the test scenes of `world`.
EvalReport evaluate(std::vector<Prediction> preds, const World& world, const SplitSpec& split);
/// Same, against an explicit scene list (classes without GT there are left out of the means).
EvalReport evaluate(std::vector<Prediction> preds, const std::vector<const Scene*>& scenes, const World& world,
                    const SplitSpec& split);

std::string predictions_jsonl(const std::vector<Prediction>& preds);

}  // namespace hoi
