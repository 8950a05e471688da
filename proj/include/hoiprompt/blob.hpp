#pragma once

// Little-endian binary records: magic, header integers, named f64 matrices,
// trailing FNV-1a checksum over every preceding byte.

#include <bit>
#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "hoiprompt/tensor.hpp"
#include "hoiprompt/util.hpp"

namespace hoi {

static_assert(std::endian::native == std::endian::little, "binary records assume a little-endian host");

class BlobWriter {
 public:
  explicit BlobWriter(const std::string& magic) { bytes_.append(magic); }

  void u64(std::uint64_t v) { bytes_.append(reinterpret_cast<const char*>(&v), sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    bytes_.append(s);
  }
  template <typename S>
  void matrix(const std::string& name, const Matrix<S>& m) {
    str(name);
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.size(); ++i) {
      const double v = static_cast<double>(m.data()[i]);
      bytes_.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  /// Appends the checksum and returns the finished record.
  std::string finish() {
    Fnv1a h;
    h.update(bytes_);
    u64(h.digest());
    return bytes_;
  }

 private:
  std::string bytes_;
};

class BlobReader {
 public:
  /// Verifies magic and trailing checksum; throws std::runtime_error naming `what`.
  BlobReader(std::string bytes, const std::string& magic, const std::string& what) : bytes_(std::move(bytes)), what_(what) {
    if (bytes_.size() < magic.size() + 8 || bytes_.compare(0, magic.size(), magic) != 0)
      throw std::runtime_error(what_ + ": not a " + magic + " record");
    Fnv1a h;
    h.update(bytes_.data(), bytes_.size() - 8);
    std::uint64_t stored;
    std::memcpy(&stored, bytes_.data() + bytes_.size() - 8, 8);
    if (stored != h.digest())
      throw std::runtime_error(what_ + ": checksum mismatch (recorded " + hex64(stored) + ", computed " + hex64(h.digest()) + ")");
    checksum_ = stored;
    pos_ = magic.size();
    end_ = bytes_.size() - 8;
  }

  std::uint64_t checksum() const { return checksum_; }
  bool done() const { return pos_ == end_; }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, bytes_.data() + pos_, 8);
    pos_ += 8;
    return v;
  }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::pair<std::string, Matrix<double>> matrix() {
    std::string name = str();
    const auto rows = static_cast<Index>(u64());
    const auto cols = static_cast<Index>(u64());
    need(static_cast<std::uint64_t>(rows * cols) * 8);
    Matrix<double> m(rows, cols);
    std::memcpy(m.data(), bytes_.data() + pos_, static_cast<std::size_t>(rows * cols) * 8);
    pos_ += static_cast<std::size_t>(rows * cols) * 8;
    return {std::move(name), std::move(m)};
  }

 private:
  void need(std::uint64_t n) const {
    if (pos_ + n > end_) throw std::runtime_error(what_ + ": truncated record");
  }
  std::string bytes_;
  std::string what_;
  std::size_t pos_ = 0, end_ = 0;
  std::uint64_t checksum_ = 0;
};

}  // namespace hoi
