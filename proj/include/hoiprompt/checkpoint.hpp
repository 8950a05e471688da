#pragma once

// Checkpoint of the trainable model state. Layout (blob.hpp framing):
//   magic "HOICKPT1", config model hash, precision, epoch, seed,
//   frozen-encoder checksum, parameter count, named parameter blobs,
//   trailing FNV-1a checksum.

#include <stdexcept>
#include <string>

#include "hoiprompt/model.hpp"

namespace hoi {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointInfo {
  std::string config_hash;
  int precision = 0;
  int epoch = 0;
  std::uint64_t seed = 0;
  std::string encoder_checksum;
};

template <typename S>
std::string serialize_checkpoint(const HoiModel<S>& model, int epoch);

/// Reads the header only (after verifying the file checksum).
CheckpointInfo read_checkpoint_info(const std::string& bytes, const std::string& what);

/// Restores parameters into `model`. Throws CheckpointError when the config
/// hash, precision or frozen-encoder checksum differ, or a parameter is
/// missing or misshapen.
template <typename S>
CheckpointInfo restore_checkpoint(HoiModel<S>& model, const std::string& bytes, const std::string& what);

}  // namespace hoi
