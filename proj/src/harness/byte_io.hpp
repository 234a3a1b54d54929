#pragma once

// Little-endian encoding helpers shared by the binary file formats.

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "xfer/core_types.hpp"

namespace xfer::io::detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : b_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == b_.size(); }

  void require(std::size_t n) const {
    if (b_.size() - pos_ < n) {
      throw Error("truncated payload at offset " + std::to_string(b_.size()) + " (needed " +
                  std::to_string(pos_ + n) + " bytes)");
    }
  }

  void expect_magic(const char* magic) {
    const std::size_t n = std::strlen(magic);
    if (b_.size() - pos_ < n || std::memcmp(b_.data() + pos_, magic, n) != 0) {
      throw Error("bad magic at offset " + std::to_string(pos_) + " (expected \"" +
                  std::string(magic) + "\")");
    }
    pos_ += n;
  }

  std::uint32_t u32() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint16_t u16() {
    require(2);
    const auto v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace xfer::io::detail
