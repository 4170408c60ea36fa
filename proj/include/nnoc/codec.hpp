#pragma once

// The full pipeline: base-level raw block, per-resolution candidate scans
// through context -> model -> range coder, and the bitstream container.

#include <cstdint>
#include <span>
#include <vector>

#include "nnoc/context.hpp"
#include "nnoc/entropy.hpp"
#include "nnoc/error.hpp"
#include "nnoc/geometry.hpp"
#include "nnoc/model.hpp"

namespace nnoc {

struct BitstreamHeader {
  uint8_t version = 1;
  Variant variant = Variant::nnoc;
  uint8_t arch_id = 0;  // (arch, n_layers) pair; see docs/bitstream.md
  uint8_t bitdepth = 2;
  uint64_t voxel_count = 0;  // at full resolution
  uint64_t model_hash = 0;
};

struct ResolutionSegment {
  std::vector<uint8_t> mask_rle;  // section mask over z in [0, 2^r)
  std::vector<uint8_t> payload;   // one terminated arithmetic stream
};

struct Bitstream {
  BitstreamHeader header;
  uint64_t base_block = 0;                  // bit z*16 + x*4 + y
  std::vector<ResolutionSegment> segments;  // r = 3..R in order
};

uint8_t arch_to_id(ModelConfig cfg);
ModelConfig arch_from_id(uint8_t id);

std::vector<uint8_t> serialize(const Bitstream& bs);
Bitstream deserialize(std::span<const uint8_t> bytes);

uint64_t encode_base(const VoxelSet& vs);
VoxelSet decode_base(uint64_t block);

// One record per coded decision, in coding order; encoder and decoder
// traces must match exactly (the fNNOC batch path is checked this way).
struct TraceEntry {
  int r = 0;
  Voxel pos;
  ContextBits ctx;
  QuantizedDist dist;
  uint8_t bit = 0;
};
using Trace = std::vector<TraceEntry>;

struct ResolutionStats {
  int r = 0;
  uint64_t candidates = 0;
  uint64_t occupied = 0;
  uint64_t mask_bytes = 0;
  uint64_t payload_bytes = 0;
  double ideal_bits = 0.0;  // sum of -log2(count/2^14) over the decisions
};

struct EncodeReport {
  std::vector<ResolutionStats> per_resolution;
  uint64_t header_bytes = 0;
  uint64_t total_bytes = 0;
  double bpov = 0.0;         // headers included
  double bpov_payload = 0.0;  // container header excluded
};

Bitstream encode(const VoxelSet& vs, const ModelParams& m, Variant v,
                 EncodeReport* report = nullptr, Trace* trace = nullptr);

VoxelSet decode(const Bitstream& bs, const ModelParams& m, Trace* trace = nullptr);

// Bits of the serialized stream per occupied full-resolution voxel.
double bpov(const Bitstream& bs, const VoxelSet& vs);

}  // namespace nnoc
