#include "hoiprompt/head.hpp"

#include <algorithm>
#include <limits>

namespace hoi {

FilteredDetections filter_detections(const std::vector<Detection>& detections, double theta) {
  FilteredDetections out;
  for (const auto& d : detections) {
    if (!(d.score > theta)) continue;
    (d.category == kHumanCategory ? out.humans : out.objects).push_back(d);
  }
  return out;
}

std::vector<PairCandidate> make_pairs(const FilteredDetections& dets) {
  std::vector<PairCandidate> pairs;
  pairs.reserve(dets.humans.size() * dets.objects.size());
  for (const auto& h : dets.humans) {
    for (const auto& o : dets.objects) pairs.push_back({h.box, o.box, o.category, h.score, o.score});
  }
  return pairs;
}

Matrix<double> verb_log_odds(const Matrix<double>& logits, const Matrix<double>& align) {
  if (logits.cols() != align.rows()) {
    throw DimensionError("verb_log_odds: logits " + shape_string(logits.rows(), logits.cols()) + " vs alignment " +
                         shape_string(align.rows(), align.cols()));
  }
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Matrix<double> out(logits.rows(), align.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double top = logits.row(i).maxCoeff();
    for (Index v = 0; v < align.cols(); ++v) {
      double in = 0, rest = 0;
      for (Index c = 0; c < logits.cols(); ++c) {
        const double e = std::exp(logits(i, c) - top);
        (align(c, v) > 0 ? in : rest) += e;
      }
      if (in == 0) out(i, v) = kNegInf;
      else if (rest == 0) out(i, v) = std::numeric_limits<double>::infinity();
      else out(i, v) = std::log(in) - std::log(rest);
    }
  }
  return out;
}

double inference_score(double human_score, double object_score, double action, double tau) {
  if (!(tau > 0)) throw ConfigError("inference_score: tau must be positive, got " + std::to_string(tau));
  return std::pow(human_score * object_score, tau) * sigmoid(action);
}

}  // namespace hoi
