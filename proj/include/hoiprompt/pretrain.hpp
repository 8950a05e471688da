#pragma once

// Fixture pretraining of the frozen encoder: the text tower, the visual
// projection and a throwaway pair projection are fitted with a softmax
// contrastive objective over all HOI classes on a separate, uniformly
// sampled corpus, plus a consistency term that gives the class-name text
// features the same neighbourhood structure as the description embeddings
// (the two share one text encoder in a real vision-language model). The
// visual transformer core keeps its random weights.

#include <functional>
#include <string>

#include "hoiprompt/encoders.hpp"

namespace hoi {

struct PretrainReport {
  double initial_loss = 0;
  double consistency = 0;        // final description-consistency KL
  double final_loss = 0;
  double train_accuracy = 0;     // top-1 over the pretraining corpus
  double heldout_accuracy = 0;   // top-1 over a disjoint corpus
};

FrozenEncoders<double> pretrain_encoders(const World& world, const RunConfig& config,
                                         const Matrix<double>& descriptions, PretrainReport* report = nullptr,
                                         const std::function<void(const std::string&)>& log = {});

}  // namespace hoi
