#pragma once

// Octree pyramid, candidate generation, canonical scan order, and the
// sliding section buffer that carries decoding state through one
// resolution level.

#include <array>
#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "nnoc/error.hpp"

namespace nnoc {

inline constexpr int kMinBitdepth = 2;
inline constexpr int kMaxBitdepth = 16;

struct Voxel {
  uint32_t x = 0, y = 0, z = 0;
  friend bool operator==(const Voxel&, const Voxel&) = default;
};

// Canonical scan order: sections by z, rows by x, columns by y.
inline bool scan_less(const Voxel& a, const Voxel& b) {
  if (a.z != b.z) return a.z < b.z;
  if (a.x != b.x) return a.x < b.x;
  return a.y < b.y;
}

struct VoxelSet {
  int bitdepth = kMinBitdepth;
  std::vector<Voxel> voxels;  // strictly ascending under scan_less

  size_t size() const { return voxels.size(); }
  bool contains(const Voxel& v) const;  // binary search
  friend bool operator==(const VoxelSet&, const VoxelSet&) = default;
};

struct CandidateList {
  int bitdepth = kMinBitdepth;
  std::vector<Voxel> entries;  // strictly ascending under scan_less
};

// Deduplicates; rejects coordinates outside [0, 2^bitdepth).
VoxelSet voxelize(std::span<const std::array<int64_t, 3>> points, int bitdepth);

// Floor-halves every coordinate and deduplicates; bitdepth drops by one.
VoxelSet downsample(const VoxelSet& vs);

// Element at index r - kMinBitdepth is the cloud at resolution r; the last
// element is the input itself.
std::vector<VoxelSet> build_pyramid(const VoxelSet& vs);

// All 8 children of every parent voxel, sorted by scan order.
CandidateList gen_candidates(const VoxelSet& parent);

// Strictly increasing z values that hold at least one candidate.
std::vector<uint32_t> sections_with_candidates(const CandidateList& cl);

// One 2^r x 2^r binary grid. Dense bit words up to depth 12 (a dense
// depth-13 image is already 8 MB and the buffer holds five of them);
// hashed sparse storage above. clear() costs O(bits set since the last
// clear), not O(grid), so sliding through sparse scenes stays cheap.
class SectionImage {
 public:
  explicit SectionImage(int bitdepth);

  bool get(uint32_t x, uint32_t y) const {
    if (dense_) {
      uint64_t idx = (uint64_t(x) << r_) | y;
      return (words_[idx >> 6] >> (idx & 63)) & 1;
    }
    return sparse_.count((uint64_t(x) << 16) | y) != 0;
  }

  void set(uint32_t x, uint32_t y, bool v);
  void clear();

 private:
  int r_;
  bool dense_;
  std::vector<uint64_t> words_;
  std::vector<uint32_t> touched_;  // word indexes dirtied since last clear
  std::unordered_set<uint64_t> sparse_;
};

// Sliding window over the candidate scan of one resolution. Five physical
// grids: final occupancy of sections z0-2 and z0-1, the occupancy of z0
// decoded so far, the candidacy of z0 (kept pristine through the section),
// and the candidacy of z0+1. A template read at dz=0 resolves to decoded
// occupancy for positions scanned before the current candidate and to
// candidacy otherwise; together the two z0 grids reproduce the single
// progressively-overwritten image the scan semantics describe, while the
// pristine candidacy grid lets a whole section's contexts be extracted
// before any of its bits are decoded.
class SectionBuffer {
 public:
  explicit SectionBuffer(const CandidateList& cl);

  int bitdepth() const { return r_; }
  uint32_t z0() const { return z0_; }

  std::span<const Voxel> section_candidates(uint32_t z) const;
  std::span<const Voxel> current_candidates() const { return section_candidates(z0_); }

  // Record the coded bit of a current-section candidate. Unoccupied
  // candidates need no call: the occupancy grid starts all-zero.
  void set_current_occupancy(uint32_t x, uint32_t y, bool occupied) {
    if (occupied) cur_occ().set(x, y, true);
  }

  // Slide to section z0+1. Every current candidate's occupancy must
  // already be recorded.
  void advance();

  // Supply the completed section's occupied positions wholesale, then
  // slide. Positions outside the candidacy of z0 are rejected.
  void advance(std::span<const Voxel> occupied);

  // Repeated advance; every section strictly between must be
  // candidate-free (the caller skips only empty sections).
  void advance_to(uint32_t z);

  const SectionImage& past2() const { return img_[slot_[0]]; }
  const SectionImage& past1() const { return img_[slot_[1]]; }
  const SectionImage& cur_occ() const { return img_[slot_[2]]; }
  const SectionImage& cur_cand() const { return img_[slot_[3]]; }
  const SectionImage& next_cand() const { return img_[slot_[4]]; }

 private:
  SectionImage& cur_occ() { return img_[slot_[2]]; }
  void fill_candidacy(SectionImage& img, uint32_t z);

  int r_;
  uint32_t z0_ = 0;
  std::vector<Voxel> entries_;          // owned copy, scan order
  std::vector<size_t> section_start_;   // entries_ index per z, size 2^r + 1
  std::vector<SectionImage> img_;
  std::array<int, 5> slot_;  // img_ index of past2/past1/cur_occ/cur_cand/next_cand
};

}  // namespace nnoc
