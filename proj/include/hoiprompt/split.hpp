#pragma once

// Zero-shot splits over the HOI class table.

#include <optional>
#include <string>
#include <vector>

#include "hoiprompt/world.hpp"

namespace hoi {

enum class SplitMode { UnseenVerb, UnseenObject, RareFirst, NonRareFirst };

std::string to_string(SplitMode mode);             // "uv", "uo", "rfuc", "nfuc"
std::optional<SplitMode> parse_split_mode(const std::string& text);
double default_unseen_fraction(SplitMode mode);

inline constexpr int kRareThreshold = 10;

struct SplitSpec {
  SplitMode mode = SplitMode::UnseenVerb;
  std::vector<int> seen;    // ascending class ids
  std::vector<int> unseen;  // ascending class ids

  bool is_unseen(int hoi) const;
};

/// Picks the unseen set for `mode`. `unseen_fraction` is relative to verbs (UV),
/// objects (UO) or classes (RF-UC / NF-UC).
SplitSpec make_split(const World& world, SplitMode mode, double unseen_fraction, std::uint64_t seed);

/// Checks the defining predicate of the split mode for every unseen class and
/// returns one message per violation (empty when sound).
std::vector<std::string> split_violations(const World& world, const SplitSpec& split);

/// Training scenes with every unseen-class interaction removed. Scenes that
/// contain an unseen interaction are dropped whole so that its human and
/// object never appear as negatives.
std::vector<const Scene*> training_scenes(const World& world, const SplitSpec& split);

/// Copies the seen flags of `split` into the class table.
void apply_split(World& world, const SplitSpec& split);

}  // namespace hoi
