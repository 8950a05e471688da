#pragma once

// Embedding-level stand-ins for the language-model descriptions: one
// description vector per HOI class and a few disparity vectors per unseen
// class, pointing from its closest seen class towards it.

#include <stdexcept>
#include <vector>

#include "hoiprompt/split.hpp"
#include "hoiprompt/tensor.hpp"

namespace hoi {

struct GuidanceEmbeddings {
  Matrix<double> descriptions;              // C x d_t, unit rows
  std::vector<Matrix<double>> disparities;  // per class; m x d_t for unseen, empty for seen
  std::vector<int> related_seen;            // per class; -1 for seen classes

  int classes() const { return static_cast<int>(descriptions.rows()); }
  int width() const { return static_cast<int>(descriptions.cols()); }
};

/// Seen class whose description has the largest dot product with row `u`;
/// ties go to the lowest class id.
template <typename Derived>
int select_related_seen(const Eigen::MatrixBase<Derived>& descriptions, int u, const std::vector<int>& seen) {
  if (seen.empty()) throw DatasetError("select_related_seen: empty seen set");
  int best = -1;
  typename Derived::Scalar best_score = 0;
  for (int s : seen) {
    const auto score = descriptions.row(u).dot(descriptions.row(s));
    if (best < 0 || score > best_score || (score == best_score && s < best)) {
      best = s;
      best_score = score;
    }
  }
  return best;
}

struct GuidanceConfig {
  int width = 32;      // d_t
  int sentences = 3;   // m
  double verb_weight = 1.0;
  double object_weight = 0.8;
  double noise = 0.1;
};

GuidanceEmbeddings build_guidance_fixtures(const World& world, const SplitSpec& split, const GuidanceConfig& config,
                                           std::uint64_t seed);

struct GuidanceStats {
  double shared_verb = 0;     // mean cosine over pairs sharing the verb only
  double shared_object = 0;   // mean cosine over pairs sharing the object only
  double shared_nothing = 0;  // mean cosine over pairs sharing neither
};

GuidanceStats guidance_stats(const World& world, const GuidanceEmbeddings& guidance);

}  // namespace hoi
