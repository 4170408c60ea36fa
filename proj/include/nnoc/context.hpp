#pragma once

// Context templates, context extraction against a SectionBuffer, training
// histograms, and the two scan drivers (sequential and section-batched)
// that encoder, decoder, and collector all share.

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nnoc/error.hpp"
#include "nnoc/geometry.hpp"

namespace nnoc {

enum class Variant : uint8_t {
  nnoc = 0,
  fnnoc = 1,
  fnnoc1 = 2,
  fnnoc2 = 3,
  fnnoc3 = 4,
  fnnoc4 = 5,  // fnnoc template, single sigmoid output
  fnnoc5 = 6,  // fnnoc template, two hidden layers
};

Variant variant_from_name(std::string_view name);
const char* variant_name(Variant v);
int context_length(Variant v);  // 100/100/75/50/36/100/100

// NNOC variants decode one candidate at a time (dz=0 bits read decoded
// occupancy at already-scanned positions); the fNNOC family reads pure
// candidacy at dz=0 so a whole section can be batched.
bool variant_is_batched(Variant v);

// What a template position contributes to the context bit.
enum class OffsetState : uint8_t {
  past_occupancy,     // dz < 0: decoded occupancy of a finished section
  scanned_occupancy,  // dz = 0, position scanned before the current one
  candidacy,          // not yet decodable: candidate-or-not
};

struct ContextOffset {
  int8_t dx = 0, dy = 0, dz = 0;
  OffsetState state = OffsetState::candidacy;
};

// Fixed per variant, ordered ascending by (dz, dx, dy); bit k of every
// context vector comes from offset k.
std::span<const ContextOffset> template_offsets(Variant v);

// A packed context vector; doubles as the histogram key.
struct ContextBits {
  std::array<uint64_t, 2> w{0, 0};
  uint8_t len = 0;

  bool get(int k) const { return (w[k >> 6] >> (k & 63)) & 1; }
  void set(int k) { w[k >> 6] |= uint64_t(1) << (k & 63); }
  friend bool operator==(const ContextBits&, const ContextBits&) = default;
};

struct ContextBitsHash {
  size_t operator()(const ContextBits& c) const {
    uint64_t h = (c.w[0] + c.len) * 0x9E3779B97F4A7C15ull;
    h ^= h >> 32;
    h += c.w[1] * 0xC2B2AE3D27D4EB4Full;
    h ^= h >> 29;
    return size_t(h * 0xD6E8FEB86659FD93ull);
  }
};

// Canonical total order used wherever histogram entries must be
// enumerated deterministically (serialization, batching).
inline bool context_less(const ContextBits& a, const ContextBits& b) {
  if (a.w[1] != b.w[1]) return a.w[1] < b.w[1];
  return a.w[0] < b.w[0];
}

// Reads the template around pos from the buffer. pos must be a candidate
// of the buffer's current section.
ContextBits extract_context(const SectionBuffer& buf, const Voxel& pos, Variant v);

struct ContextCounts {
  uint64_t no0 = 0, no1 = 0;
  friend bool operator==(const ContextCounts&, const ContextCounts&) = default;
};

struct ContextHistogram {
  Variant variant = Variant::nnoc;
  std::unordered_map<ContextBits, ContextCounts, ContextBitsHash> entries;

  void add(const ContextBits& c, bool occupied) {
    auto& e = entries[c];
    (occupied ? e.no1 : e.no0)++;
  }
  uint64_t total() const;

  // Entries under context_less; the canonical enumeration.
  std::vector<std::pair<ContextBits, ContextCounts>> sorted_entries() const;
};

void merge_histogram(ContextHistogram& into, const ContextHistogram& from);

// Simulates the exact encoder scan of every resolution r >= 3 and counts
// each candidate's context with its true occupancy.
ContextHistogram collect_training_contexts(const std::vector<VoxelSet>& pyramid,
                                           Variant v);

std::vector<uint8_t> save_histogram(const ContextHistogram& h);
ContextHistogram load_histogram(std::span<const uint8_t> bytes);

// --- Scan drivers -----------------------------------------------------
//
// Both walk the candidates of one resolution in scan order, maintaining
// the section buffer. The step callback supplies the occupancy bit (the
// true bit when encoding or collecting, the decoded bit when decoding).

// step: bool(const Voxel&, const ContextBits&). Context extraction is
// interleaved with the bits, as NNOC requires.
template <class StepFn>
void scan_sequential(const CandidateList& cl, Variant v, StepFn&& step) {
  SectionBuffer buf(cl);
  for (uint32_t z : sections_with_candidates(cl)) {
    buf.advance_to(z);
    for (const Voxel& c : buf.current_candidates()) {
      bool bit = step(c, extract_context(buf, c, v));
      buf.set_current_occupancy(c.x, c.y, bit);
    }
    buf.advance();
  }
}

// section: void(span<const Voxel>, span<const ContextBits>, span<uint8_t> bits_out).
// All contexts of a section are extracted before any of its bits are
// produced; the callback fills bits_out with the section's occupancies in
// scan order. Only valid for variants whose dz=0 bits are candidacy.
template <class SectionFn>
void scan_batched(const CandidateList& cl, Variant v, SectionFn&& section) {
  if (!variant_is_batched(v))
    fail(Err::Internal, std::string("batched scan is not valid for ") + variant_name(v));
  SectionBuffer buf(cl);
  std::vector<ContextBits> ctxs;
  std::vector<uint8_t> bits;
  for (uint32_t z : sections_with_candidates(cl)) {
    buf.advance_to(z);
    std::span<const Voxel> cands = buf.current_candidates();
    ctxs.clear();
    ctxs.reserve(cands.size());
    for (const Voxel& c : cands) ctxs.push_back(extract_context(buf, c, v));
    bits.assign(cands.size(), 0);
    section(cands, std::span<const ContextBits>(ctxs), std::span<uint8_t>(bits));
    for (size_t i = 0; i < cands.size(); i++)
      buf.set_current_occupancy(cands[i].x, cands[i].y, bits[i] != 0);
    buf.advance();
  }
}

}  // namespace nnoc
