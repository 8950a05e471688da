#pragma once

// Finite-difference audit of every trainable parameter group of the model on
// a small training batch, in 64-bit precision.

#include <memory>
#include <string>
#include <vector>

#include "hoiprompt/model.hpp"

namespace hoi {

struct GroupCheck {
  std::string group;
  bool frozen = false;  // frozen encoder group, reported as no-grad and never checked
  bool used = true;     // false when no parameter of the group reaches the loss
  double rel_error = 0;
  std::size_t entries = 0;
  std::size_t tensors = 0;
  bool passed = true;
};

struct AuditOptions {
  std::uint64_t seed = 1;
  std::size_t entries_per_tensor = 3;
  double step = 1e-5;
  double tolerance = 1e-4;
  int scenes = 2;
  bool randomize_up = true;  // zero-initialised up-projections would hide the paths behind them
};

/// Checks each trainable group; frozen encoder groups come last with frozen = true.
std::vector<GroupCheck> audit_gradients(const RunConfig& config, std::shared_ptr<const FrozenEncoders<double>> encoders,
                                        const World& world, const SplitSpec& split, const GuidanceEmbeddings& guidance,
                                        const AuditOptions& options);

std::string format_audit(const std::vector<GroupCheck>& checks);

}  // namespace hoi
