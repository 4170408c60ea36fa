#pragma once

// Binary range coder over 14-bit quantized counts, plus the run-length
// code for section masks. Integer-only throughout: streams are
// platform-independent for a given sequence of distributions.

#include <cstdint>
#include <span>
#include <vector>

#include "nnoc/error.hpp"

namespace nnoc {

inline constexpr int kProbBits = 14;
inline constexpr uint32_t kProbTotal = 1u << kProbBits;

struct QuantizedDist {
  uint16_t c0 = kProbTotal / 2;
  uint16_t c1 = kProbTotal / 2;
  friend bool operator==(const QuantizedDist&, const QuantizedDist&) = default;
};

inline void validate(const QuantizedDist& d) {
  if (d.c0 < 1 || d.c1 < 1 || uint32_t(d.c0) + d.c1 != kProbTotal)
    fail(Err::InvalidDistribution,
         "c0=" + std::to_string(d.c0) + " c1=" + std::to_string(d.c1));
}

// 32-bit range, 33 significant bits of low; renormalizes byte-wise at
// 2^24 and resolves carries through a cached byte plus a pending-0xFF
// run. The split point uses the full 46-bit product (range * c0) >> 14,
// so the per-symbol loss against -log2(c/2^14) stays below
// log2(1 + 2^-10) bits and the stream tracks the analytic codelength
// closely; termination flushes all of low, at most 5 bytes plus the
// pending run.
class ArithmeticEncoder {
 public:
  void encode(int bit, QuantizedDist d) {
    validate(d);
    uint32_t bound = uint32_t((uint64_t(range_) * d.c0) >> kProbBits);
    if (bit == 0) {
      range_ = bound;
    } else {
      low_ += bound;
      range_ -= bound;
    }
    while (range_ < (1u << 24)) {
      shift_low();
      range_ <<= 8;
    }
  }

  // Terminates the stream. The first emitted byte is always zero (the
  // initial cache); the decoder skips it.
  std::vector<uint8_t> finish();

  size_t bytes_emitted() const { return out_.size(); }

 private:
  void shift_low();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;  // cache_ plus the pending 0xFF run
  std::vector<uint8_t> out_;
};

class ArithmeticDecoder {
 public:
  // Consumes the leading zero byte and loads the 32-bit code window.
  explicit ArithmeticDecoder(std::span<const uint8_t> data) : in_(data) {
    next_byte();
    for (int i = 0; i < 4; i++) code_ = (code_ << 8) | next_byte();
  }

  int decode(QuantizedDist d) {
    validate(d);
    uint32_t bound = uint32_t((uint64_t(range_) * d.c0) >> kProbBits);
    int bit;
    if (code_ < bound) {
      bit = 0;
      range_ = bound;
    } else {
      bit = 1;
      code_ -= bound;
      range_ -= bound;
    }
    while (range_ < (1u << 24)) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
    return bit;
  }

  size_t bytes_consumed() const { return pos_; }

 private:
  uint8_t next_byte() {
    if (pos_ >= in_.size())
      fail(Err::StreamExhausted, "arithmetic payload ends after " +
                                     std::to_string(in_.size()) + " bytes");
    return in_[pos_++];
  }

  std::span<const uint8_t> in_;
  size_t pos_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

// Leading byte carries the first run's bit value; run lengths follow as
// LEB128 varints summing to the mask length.
std::vector<uint8_t> rle_encode(const std::vector<uint8_t>& mask);
std::vector<uint8_t> rle_decode(std::span<const uint8_t> bytes, size_t len);

}  // namespace nnoc
