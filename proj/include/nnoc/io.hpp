#pragma once

// PLY ingestion/emission and requantization to a coding bit-depth.

#include <array>
#include <string>
#include <vector>

#include "nnoc/error.hpp"
#include "nnoc/geometry.hpp"

namespace nnoc {

struct RawPointCloud {
  std::vector<std::array<double, 3>> points;
};

// ascii or binary_little_endian PLY with scalar x, y, z vertex
// properties; everything else is skipped.
RawPointCloud read_ply(const std::string& path);

// binary_little_endian, float vertex coordinates (exact for any depth we
// code, which tops out at 16 bits).
void write_ply(const VoxelSet& vs, const std::string& path);

// Integer cloud already inside [0, 2^target): kept as-is. Non-negative
// integer cloud that overflows the target: floor-halved per excess bit,
// matching the octree downsample. Anything else: shifted to the origin
// and scaled so the widest axis spans [0, 2^target - 1], then floored.
VoxelSet requantize(const RawPointCloud& pc, int target_bitdepth);

std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const uint8_t> bytes);

}  // namespace nnoc
