#include "nnoc/entropy.hpp"

namespace nnoc {

void ArithmeticEncoder::shift_low() {
  // The byte leaving the 33-bit low register is final once it is not
  // 0xFF (no later carry can ripple through it) or once a carry is
  // already present; otherwise it joins the pending run.
  if (uint32_t(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const uint8_t carry = uint8_t(low_ >> 32);
    uint8_t b = cache_;
    do {
      out_.push_back(uint8_t(b + carry));
      b = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = uint8_t(low_ >> 24);
  }
  cache_size_++;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

std::vector<uint8_t> ArithmeticEncoder::finish() {
  for (int i = 0; i < 5; i++) shift_low();
  // The decoder pre-loads five bytes and then pulls exactly one byte per
  // renormalization, so it consumes (symbol renorms + 5) bytes in total;
  // the five shifts above leave cache_size_ - 1 of those still buffered
  // (the run can only be the cached byte followed by 0xFFs, and no carry
  // can arrive anymore). Emit them so honest streams never run short.
  if (cache_size_ > 1) {
    out_.push_back(cache_);
    for (uint64_t i = 2; i < cache_size_; i++) out_.push_back(0xFF);
  }
  return std::move(out_);
}

std::vector<uint8_t> rle_encode(const std::vector<uint8_t>& mask) {
  std::vector<uint8_t> out;
  if (mask.empty()) return out;
  out.push_back(mask[0] ? 1 : 0);
  size_t i = 0;
  while (i < mask.size()) {
    const uint8_t v = mask[i] ? 1 : 0;
    size_t j = i;
    while (j < mask.size() && (mask[j] ? 1 : 0) == v) j++;
    uint64_t run = j - i;
    while (run >= 0x80) {
      out.push_back(uint8_t(run) | 0x80);
      run >>= 7;
    }
    out.push_back(uint8_t(run));
    i = j;
  }
  return out;
}

std::vector<uint8_t> rle_decode(std::span<const uint8_t> bytes, size_t len) {
  std::vector<uint8_t> mask;
  if (len == 0) {
    if (!bytes.empty()) fail(Err::CorruptRle, "bytes after an empty mask");
    return mask;
  }
  if (bytes.empty()) fail(Err::CorruptRle, "missing leading value byte");
  if (bytes[0] > 1) fail(Err::CorruptRle, "leading value byte must be 0 or 1");
  uint8_t v = bytes[0];
  size_t pos = 1;
  mask.reserve(len);
  while (mask.size() < len) {
    uint64_t run = 0;
    int shift = 0;
    while (true) {
      if (pos >= bytes.size()) fail(Err::CorruptRle, "truncated run length");
      if (shift >= 63) fail(Err::CorruptRle, "run length overflow");
      const uint8_t b = bytes[pos++];
      run |= uint64_t(b & 0x7F) << shift;
      if (!(b & 0x80)) break;
      shift += 7;
    }
    if (run == 0) fail(Err::CorruptRle, "zero-length run");
    if (run > len - mask.size()) fail(Err::CorruptRle, "runs exceed the mask length");
    mask.insert(mask.end(), size_t(run), v);
    v ^= 1;
  }
  if (pos != bytes.size()) fail(Err::CorruptRle, "bytes after the final run");
  return mask;
}

}  // namespace nnoc
