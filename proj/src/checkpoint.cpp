#include "hoiprompt/checkpoint.hpp"

#include <map>

#include "hoiprompt/blob.hpp"

namespace hoi {

namespace {

constexpr const char* kMagic = "HOICKPT1";

template <typename S>
int precision_of() {
  return sizeof(S) == 8 ? 64 : 32;
}

CheckpointInfo read_header(BlobReader& in) {
  CheckpointInfo info;
  info.config_hash = in.str();
  info.precision = static_cast<int>(in.u64());
  info.epoch = static_cast<int>(in.u64());
  info.seed = in.u64();
  info.encoder_checksum = in.str();
  return info;
}

BlobReader open(const std::string& bytes, const std::string& what) {
  try {
    return BlobReader(bytes, kMagic, what);
  } catch (const std::runtime_error& e) {
    throw CheckpointError(e.what());
  }
}

}  // namespace

template <typename S>
std::string serialize_checkpoint(const HoiModel<S>& model, int epoch) {
  BlobWriter out(kMagic);
  out.str(model.config().model_hash());
  out.u64(static_cast<std::uint64_t>(precision_of<S>()));
  out.u64(static_cast<std::uint64_t>(epoch));
  out.u64(model.config().seed);
  out.str(hex64(model.encoders().checksum()));
  const auto& params = model.params().params();
  out.u64(params.size());
  for (const auto& p : params) out.matrix(p.name, p.tensor.value());
  return out.finish();
}

CheckpointInfo read_checkpoint_info(const std::string& bytes, const std::string& what) {
  BlobReader in = open(bytes, what);
  return read_header(in);
}

template <typename S>
CheckpointInfo restore_checkpoint(HoiModel<S>& model, const std::string& bytes, const std::string& what) {
  BlobReader in = open(bytes, what);
  const CheckpointInfo info = read_header(in);
  const std::string encoder = hex64(model.encoders().checksum());
  if (info.precision != precision_of<S>()) {
    throw CheckpointError(what + ": stored at " + std::to_string(info.precision) + "-bit precision, model is " +
                          std::to_string(precision_of<S>()) + "-bit");
  }
  if (info.encoder_checksum != encoder) {
    throw CheckpointError(what + ": trained against frozen encoder " + info.encoder_checksum + ", current encoder is " +
                          encoder);
  }
  if (info.config_hash != model.config().model_hash()) {
    throw CheckpointError(what + ": model configuration differs (checkpoint " + info.config_hash + ", current " +
                          model.config().model_hash() + ")");
  }
  const std::uint64_t count = in.u64();
  std::map<std::string, Matrix<double>> stored;
  for (std::uint64_t k = 0; k < count; ++k) {
    auto [name, value] = in.matrix();
    stored.emplace(std::move(name), std::move(value));
  }
  if (!in.done()) throw CheckpointError(what + ": trailing bytes");
  auto& params = model.params().params();
  if (stored.size() != params.size()) {
    throw CheckpointError(what + ": holds " + std::to_string(stored.size()) + " parameters, model has " +
                          std::to_string(params.size()));
  }
  for (auto& p : params) {
    auto it = stored.find(p.name);
    if (it == stored.end()) throw CheckpointError(what + ": missing parameter '" + p.name + "'");
    if (it->second.rows() != p.tensor.rows() || it->second.cols() != p.tensor.cols())
      throw CheckpointError(what + ": parameter '" + p.name + "' has the wrong shape");
    p.tensor.mutable_value() = it->second.template cast<S>();
  }
  return info;
}

template std::string serialize_checkpoint<float>(const HoiModel<float>&, int);
template std::string serialize_checkpoint<double>(const HoiModel<double>&, int);
template CheckpointInfo restore_checkpoint<float>(HoiModel<float>&, const std::string&, const std::string&);
template CheckpointInfo restore_checkpoint<double>(HoiModel<double>&, const std::string&, const std::string&);

}  // namespace hoi
