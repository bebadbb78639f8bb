#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "funcodec/error.hpp"

namespace funcodec::detail {

class ByteWriter {
 public:
  void bytes(std::span<const uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void u8(uint8_t v) { out_.push_back(v); }
  void u16(uint16_t v) { le(v, 2); }
  void u32(uint32_t v) { le(v, 4); }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }

  std::vector<uint8_t>& buffer() { return out_; }
  std::vector<uint8_t> take() { return std::move(out_); }

 private:
  void le(uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  std::vector<uint8_t> out_;
};

// Bounds-checked little-endian reader; every overrun raises TruncatedError.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> in) : in_(in) {}

  size_t remaining() const { return in_.size() - pos_; }
  size_t position() const { return pos_; }

  std::span<const uint8_t> bytes(size_t n, const char* what) {
    need(n, what);
    auto out = in_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  uint8_t u8(const char* what) { return static_cast<uint8_t>(le(1, what)); }
  uint16_t u16(const char* what) { return static_cast<uint16_t>(le(2, what)); }
  uint32_t u32(const char* what) { return static_cast<uint32_t>(le(4, what)); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

  void need(size_t n, const char* what) const {
    if (n > remaining()) {
      throw TruncatedError(std::string("truncated input while reading ") + what + ": need " +
                           std::to_string(n) + " bytes, " + std::to_string(remaining()) + " left");
    }
  }

 private:
  uint64_t le(int n, const char* what) {
    need(static_cast<size_t>(n), what);
    uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<uint64_t>(in_[pos_ + static_cast<size_t>(i)]) << (8 * i);
    pos_ += static_cast<size_t>(n);
    return v;
  }

  std::span<const uint8_t> in_;
  size_t pos_ = 0;
};

}  // namespace funcodec::detail
