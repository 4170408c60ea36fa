#include "nnoc/geometry.hpp"

#include <algorithm>
#include <string>

namespace nnoc {

namespace {

void check_bitdepth(int r) {
  if (r < kMinBitdepth || r > kMaxBitdepth)
    fail(Err::BitdepthUnsupported, "bitdepth " + std::to_string(r) +
                                       " outside [" + std::to_string(kMinBitdepth) +
                                       ", " + std::to_string(kMaxBitdepth) + "]");
}

void sort_unique(std::vector<Voxel>& v) {
  std::sort(v.begin(), v.end(), scan_less);
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

bool VoxelSet::contains(const Voxel& v) const {
  auto it = std::lower_bound(voxels.begin(), voxels.end(), v, scan_less);
  return it != voxels.end() && *it == v;
}

VoxelSet voxelize(std::span<const std::array<int64_t, 3>> points, int bitdepth) {
  check_bitdepth(bitdepth);
  const int64_t n = int64_t(1) << bitdepth;
  VoxelSet vs;
  vs.bitdepth = bitdepth;
  vs.voxels.reserve(points.size());
  for (const auto& p : points) {
    for (int a = 0; a < 3; a++)
      if (p[a] < 0 || p[a] >= n)
        fail(Err::CoordinateOutOfRange,
             "(" + std::to_string(p[0]) + ", " + std::to_string(p[1]) + ", " +
                 std::to_string(p[2]) + ") at bitdepth " + std::to_string(bitdepth));
    vs.voxels.push_back({uint32_t(p[0]), uint32_t(p[1]), uint32_t(p[2])});
  }
  sort_unique(vs.voxels);
  return vs;
}

VoxelSet downsample(const VoxelSet& vs) {
  if (vs.bitdepth <= kMinBitdepth)
    fail(Err::BitdepthUnderflow, "cannot downsample below bitdepth 2");
  VoxelSet out;
  out.bitdepth = vs.bitdepth - 1;
  out.voxels.reserve(vs.voxels.size());
  for (const Voxel& v : vs.voxels) out.voxels.push_back({v.x >> 1, v.y >> 1, v.z >> 1});
  sort_unique(out.voxels);
  return out;
}

std::vector<VoxelSet> build_pyramid(const VoxelSet& vs) {
  check_bitdepth(vs.bitdepth);
  std::vector<VoxelSet> pyr(size_t(vs.bitdepth - kMinBitdepth) + 1);
  pyr.back() = vs;
  for (size_t i = pyr.size() - 1; i > 0; i--) pyr[i - 1] = downsample(pyr[i]);
  return pyr;
}

CandidateList gen_candidates(const VoxelSet& parent) {
  if (parent.voxels.empty()) fail(Err::EmptyParent, "no parent voxels");
  CandidateList cl;
  cl.bitdepth = parent.bitdepth + 1;
  cl.entries.reserve(parent.voxels.size() * 8);
  for (const Voxel& p : parent.voxels)
    for (uint32_t g = 0; g < 2; g++)
      for (uint32_t a = 0; a < 2; a++)
        for (uint32_t b = 0; b < 2; b++)
          cl.entries.push_back({2 * p.x + a, 2 * p.y + b, 2 * p.z + g});
  std::sort(cl.entries.begin(), cl.entries.end(), scan_less);
  return cl;
}

std::vector<uint32_t> sections_with_candidates(const CandidateList& cl) {
  std::vector<uint32_t> zs;
  for (const Voxel& v : cl.entries)
    if (zs.empty() || zs.back() != v.z) zs.push_back(v.z);
  return zs;
}

SectionImage::SectionImage(int bitdepth) : r_(bitdepth), dense_(bitdepth <= 12) {
  if (dense_) words_.assign(((uint64_t(1) << (2 * r_)) + 63) / 64, 0);
}

void SectionImage::set(uint32_t x, uint32_t y, bool v) {
  if (dense_) {
    uint64_t idx = (uint64_t(x) << r_) | y;
    uint64_t& w = words_[idx >> 6];
    if (v) {
      if (w == 0) touched_.push_back(uint32_t(idx >> 6));
      w |= uint64_t(1) << (idx & 63);
    } else {
      w &= ~(uint64_t(1) << (idx & 63));
    }
  } else {
    uint64_t key = (uint64_t(x) << 16) | y;
    if (v)
      sparse_.insert(key);
    else
      sparse_.erase(key);
  }
}

void SectionImage::clear() {
  if (dense_) {
    for (uint32_t w : touched_) words_[w] = 0;
    touched_.clear();
  } else {
    sparse_.clear();
  }
}

SectionBuffer::SectionBuffer(const CandidateList& cl)
    : r_(cl.bitdepth), entries_(cl.entries), slot_{0, 1, 2, 3, 4} {
  check_bitdepth(r_);
  const size_t nz = size_t(1) << r_;
  section_start_.assign(nz + 1, 0);
  for (const Voxel& v : entries_) section_start_[v.z + 1]++;
  for (size_t z = 0; z < nz; z++) section_start_[z + 1] += section_start_[z];
  img_.reserve(5);
  for (int i = 0; i < 5; i++) img_.emplace_back(r_);
  z0_ = entries_.empty() ? 0 : entries_.front().z;
  fill_candidacy(img_[slot_[3]], z0_);
  if (z0_ + 1 < nz) fill_candidacy(img_[slot_[4]], z0_ + 1);
}

std::span<const Voxel> SectionBuffer::section_candidates(uint32_t z) const {
  if (z >= (uint32_t(1) << r_)) return {};
  return std::span<const Voxel>(entries_).subspan(section_start_[z],
                                                  section_start_[z + 1] - section_start_[z]);
}

void SectionBuffer::fill_candidacy(SectionImage& img, uint32_t z) {
  for (const Voxel& v : section_candidates(z)) img.set(v.x, v.y, true);
}

void SectionBuffer::advance() {
  // past2 drops out and becomes the fresh occupancy grid of z0+1; the
  // pristine candidacy grid of z0 is recycled as the candidacy of z0+2.
  const int old_p2 = slot_[0], old_p1 = slot_[1], old_occ = slot_[2];
  const int old_cand = slot_[3], old_next = slot_[4];
  img_[old_p2].clear();
  img_[old_cand].clear();
  slot_ = {old_p1, old_occ, old_p2, old_next, old_cand};
  z0_++;
  if (uint64_t(z0_) + 1 < (uint64_t(1) << r_)) fill_candidacy(img_[slot_[4]], z0_ + 1);
}

void SectionBuffer::advance(std::span<const Voxel> occupied) {
  const SectionImage& cand = cur_cand();
  for (const Voxel& v : occupied)
    if (v.z != z0_ || !cand.get(v.x, v.y))
      fail(Err::OccupancyOutsideCandidates,
           "(" + std::to_string(v.x) + ", " + std::to_string(v.y) + ", " +
               std::to_string(v.z) + ") is not a candidate of section " +
               std::to_string(z0_));
  for (const Voxel& v : occupied) set_current_occupancy(v.x, v.y, true);
  advance();
}

void SectionBuffer::advance_to(uint32_t z) {
  if (z < z0_)
    fail(Err::Internal, "buffer cannot slide backwards to section " + std::to_string(z));
  while (z0_ < z) {
    if (!section_candidates(z0_).empty())
      fail(Err::Internal,
           "section " + std::to_string(z0_) + " has candidates and cannot be skipped");
    advance();
  }
}

}  // namespace nnoc
