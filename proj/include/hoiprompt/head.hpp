#pragma once

// From detections and encoder outputs to per-pair interaction scores.

#include <cmath>
#include <vector>

#include "hoiprompt/nn.hpp"
#include "hoiprompt/roi.hpp"
#include "hoiprompt/world.hpp"

namespace hoi {

struct FilteredDetections {
  std::vector<Detection> humans;
  std::vector<Detection> objects;
};

/// Keeps detections scoring strictly above theta, split by category.
FilteredDetections filter_detections(const std::vector<Detection>& detections, double theta);

struct PairCandidate {
  Box human, object;
  int object_category = 0;  // detector category (object id + 1)
  double human_score = 0, object_score = 0;
};

/// Every (human, non-human) combination of the filtered detections.
std::vector<PairCandidate> make_pairs(const FilteredDetections& dets);

struct SelectedClassSet {
  std::vector<int> classes;     // selected HOI ids, grouped by verb ascending
  std::vector<int> verb_of;     // verb of each selected class
  Matrix<double> align;         // C_sel x V one-hot
};

/// For each verb, the two of its classes whose descriptions have the lowest
/// dot product (lexicographically first pair on ties); a verb with one class
/// contributes it alone. Throws DatasetError if a verb has no class.
template <typename Derived>
SelectedClassSet select_hoi_pairs_per_action(const Eigen::MatrixBase<Derived>& descriptions,
                                             const std::vector<HoiCategory>& classes, int n_verbs) {
  SelectedClassSet sel;
  for (int v = 0; v < n_verbs; ++v) {
    std::vector<int> mine;
    for (const auto& c : classes)
      if (c.verb == v) mine.push_back(c.id);
    if (mine.empty()) throw DatasetError("verb " + std::to_string(v) + " has no HOI class");
    if (mine.size() == 1) {
      sel.classes.push_back(mine[0]);
      sel.verb_of.push_back(v);
      continue;
    }
    int bi = mine[0], bj = mine[1];
    auto best = descriptions.row(bi).dot(descriptions.row(bj));
    for (std::size_t a = 0; a < mine.size(); ++a) {
      for (std::size_t b = a + 1; b < mine.size(); ++b) {
        const auto d = descriptions.row(mine[a]).dot(descriptions.row(mine[b]));
        if (d < best) {
          best = d;
          bi = mine[a];
          bj = mine[b];
        }
      }
    }
    sel.classes.insert(sel.classes.end(), {bi, bj});
    sel.verb_of.insert(sel.verb_of.end(), {v, v});
  }
  sel.align = Matrix<double>::Zero(static_cast<Index>(sel.classes.size()), n_verbs);
  for (std::size_t k = 0; k < sel.classes.size(); ++k) sel.align(static_cast<Index>(k), sel.verb_of[k]) = 1.0;
  return sel;
}

/// MLP over [E_hum ; E_obj] (rows are pairs).
template <typename S>
struct IntraFusion {
  Linear<S> fc1, fc2;

  IntraFusion() = default;
  IntraFusion(ParamStore<S>& store, int width, int hidden, Rng& rng) {
    fc1 = Linear<S>(store, "intra.fc1", "intra_fusion", 2 * width, hidden, rng, true);
    fc2 = Linear<S>(store, "intra.fc2", "intra_fusion", hidden, width, rng, true);
  }

  Tensor<S> operator()(const Tensor<S>& human, const Tensor<S>& object) const {
    return fc2(gelu(fc1(concat_cols<S>({human, object}))));
  }
};

/// Self-attention across all pairs of a scene with a zero-initialised up-projection.
template <typename S>
struct InterFusion {
  GuidanceAdapter<S> block;

  InterFusion() = default;
  InterFusion(ParamStore<S>& store, int width, int heads, Rng& rng)
      : block(store, "inter", "inter_fusion", width, width / 4, heads, rng) {}

  Tensor<S> operator()(const Tensor<S>& pairs) const {
    if (pairs.rows() == 0) return pairs;
    return block.self_attend(pairs);
  }
};

/// logit_scale * cos(E_hoi[i], W_t[c]) for every pair and class (q x C_sel).
template <typename S>
Tensor<S> class_logits(const Tensor<S>& pair_features, const Tensor<S>& text_features, const Tensor<S>& logit_scale) {
  if (pair_features.cols() != text_features.cols()) {
    throw DimensionError("class_logits: pair features " + shape_string(pair_features.rows(), pair_features.cols()) +
                         " vs text features " + shape_string(text_features.rows(), text_features.cols()));
  }
  return scale_by(matmul_nt(l2_normalize_rows(pair_features), l2_normalize_rows(text_features)), logit_scale);
}

/// p_hoi: row softmax of the class logits.
template <typename S>
Tensor<S> score_pairs(const Tensor<S>& pair_features, const Tensor<S>& text_features, const Tensor<S>& logit_scale) {
  return softmax_rows(class_logits(pair_features, text_features, logit_scale));
}

/// s_a = p_hoi * align.
template <typename S>
Tensor<S> action_scores(const Tensor<S>& p_hoi, const Matrix<S>& align) {
  if (p_hoi.cols() != align.rows()) {
    throw DimensionError("action_scores: p_hoi " + shape_string(p_hoi.rows(), p_hoi.cols()) + " vs alignment " +
                         shape_string(align.rows(), align.cols()));
  }
  return matmul(p_hoi, Tensor<S>::constant(align));
}

/// Verb log-odds from class logits: log(sum_{c in v} e^l_c) - log(sum_{c not in v} e^l_c).
/// The logistic of this value is the verb's share of the softmax mass.
Matrix<double> verb_log_odds(const Matrix<double>& logits, const Matrix<double>& align);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// (s_h * s_o)^tau * sigmoid(s_a). Throws ConfigError for tau <= 0.
double inference_score(double human_score, double object_score, double action, double tau);

}  // namespace hoi
