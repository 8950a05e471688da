#pragma once

// On-disk layout of a generated dataset:
//   <root>/world.meta         key=value summary, class table, checksums
//   <root>/scenes.jsonl       header line + one scene per line
//   <root>/encoder.bin        frozen encoder weights (see encoders.hpp)
//   <root>/<mode>/split.json
//   <root>/<mode>/guidance.jsonl
// Every file carries a content checksum (FNV-1a 64, hex) that loaders verify.

#include <string>

#include "hoiprompt/guidance.hpp"
#include "hoiprompt/split.hpp"
#include "hoiprompt/world.hpp"

namespace hoi {

class ChecksumError : public DatasetError {
 public:
  ChecksumError(const std::string& what_file, const std::string& expected, const std::string& actual)
      : DatasetError(what_file + ": checksum mismatch (recorded " + expected + ", computed " + actual + ")") {}
};

/// Writes world.meta and scenes.jsonl; returns the world checksum.
std::string save_world(const std::string& root, const World& world);
World load_world(const std::string& root);
/// Checksum recorded in world.meta (without loading scenes).
std::string world_checksum(const std::string& root);

std::string save_split(const std::string& path, const SplitSpec& split);
SplitSpec load_split(const std::string& path);

std::string save_guidance(const std::string& path, const GuidanceEmbeddings& guidance);
GuidanceEmbeddings load_guidance(const std::string& path);

std::string split_dir(const std::string& root, SplitMode mode);

}  // namespace hoi
