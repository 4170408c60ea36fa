#pragma once

// Little-endian byte stream helpers plus the FNV-1a hash used for model
// integrity. All multi-byte fields in every file format are little-endian,
// so nothing here is conditional on host order.

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "nnoc/error.hpp"

namespace nnoc {

class ByteWriter {
 public:
  void put_u8(uint8_t v) { buf_.push_back(v); }
  void put_u16(uint16_t v) { put_le(v, 2); }
  void put_u32(uint32_t v) { put_le(v, 4); }
  void put_u64(uint64_t v) { put_le(v, 8); }
  void put_f32(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(bits);
  }
  void put_bytes(const void* p, size_t n) {
    const uint8_t* b = static_cast<const uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void put_bytes(std::span<const uint8_t> s) { put_bytes(s.data(), s.size()); }

  const std::vector<uint8_t>& bytes() const { return buf_; }
  std::vector<uint8_t> take() { return std::move(buf_); }
  size_t size() const { return buf_.size(); }

 private:
  void put_le(uint64_t v, int n) {
    for (int i = 0; i < n; i++) buf_.push_back(uint8_t(v >> (8 * i)));
  }
  std::vector<uint8_t> buf_;
};

// Bounds-checked reader over a borrowed buffer. The error kind is
// configurable so stream parsing reports StreamExhausted while model
// parsing reports CorruptModelFile, etc.
class ByteReader {
 public:
  ByteReader(std::span<const uint8_t> data, Err on_underrun)
      : data_(data), err_(on_underrun) {}

  uint8_t get_u8() { return take(1)[0]; }
  uint16_t get_u16() { return uint16_t(get_le(2)); }
  uint32_t get_u32() { return uint32_t(get_le(4)); }
  uint64_t get_u64() { return get_le(8); }
  float get_f32() {
    uint32_t bits = get_u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::span<const uint8_t> get_bytes(size_t n) { return take(n); }

  size_t remaining() const { return data_.size() - pos_; }
  size_t pos() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::span<const uint8_t> take(size_t n) {
    if (remaining() < n)
      fail(err_, "need " + std::to_string(n) + " bytes, have " +
                     std::to_string(remaining()));
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  uint64_t get_le(int n) {
    auto s = take(size_t(n));
    uint64_t v = 0;
    for (int i = 0; i < n; i++) v |= uint64_t(s[i]) << (8 * i);
    return v;
  }

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
  Err err_;
};

inline uint64_t fnv1a64(const void* p, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const uint8_t* b = static_cast<const uint8_t*>(p);
  for (size_t i = 0; i < n; i++) {
    h ^= b[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace nnoc
