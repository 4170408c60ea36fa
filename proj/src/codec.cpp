#include "nnoc/codec.hpp"

#include <algorithm>
#include <cmath>

#include "nnoc/bytes.hpp"

namespace nnoc {

namespace {

constexpr char kMagic[8] = {'N', 'N', 'O', 'C', 'B', 'S', 'T', '1'};

void check_model(const ModelParams& m, Variant v) {
  if (m.n_C != context_length(v))
    fail(Err::ModelVariantMismatch,
         std::string(variant_name(v)) + " needs n_C " +
             std::to_string(context_length(v)) + ", model has " + std::to_string(m.n_C));
  const ModelConfig want = variant_model_config(v);
  if (m.arch != want.arch || m.n_layers != want.n_layers)
    fail(Err::ModelVariantMismatch,
         std::string("model architecture does not match ") + variant_name(v));
}

std::vector<uint8_t> section_mask(const CandidateList& cl) {
  std::vector<uint8_t> mask(size_t(1) << cl.bitdepth, 0);
  for (uint32_t z : sections_with_candidates(cl)) mask[z] = 1;
  return mask;
}

double dist_bits(const QuantizedDist& d, int bit) {
  return -std::log2(double(bit ? d.c1 : d.c0) / double(kProbTotal));
}

}  // namespace

uint8_t arch_to_id(ModelConfig cfg) {
  if (cfg.arch == Arch::softmax2 && cfg.n_layers == 1) return 0;
  if (cfg.arch == Arch::sigmoid1 && cfg.n_layers == 1) return 1;
  if (cfg.arch == Arch::softmax2 && cfg.n_layers == 2) return 2;
  fail(Err::Internal, "unmapped architecture");
}

ModelConfig arch_from_id(uint8_t id) {
  switch (id) {
    case 0: return {Arch::softmax2, 1};
    case 1: return {Arch::sigmoid1, 1};
    case 2: return {Arch::softmax2, 2};
  }
  fail(Err::StreamCorrupt, "arch id " + std::to_string(id));
}

std::vector<uint8_t> serialize(const Bitstream& bs) {
  ByteWriter w;
  w.put_bytes(kMagic, 8);
  w.put_u8(bs.header.version);
  w.put_u8(uint8_t(bs.header.variant));
  w.put_u8(bs.header.arch_id);
  w.put_u8(bs.header.bitdepth);
  w.put_u64(bs.header.voxel_count);
  w.put_u64(bs.header.model_hash);
  w.put_u64(bs.base_block);
  for (const ResolutionSegment& s : bs.segments) {
    w.put_u64(s.mask_rle.size());
    w.put_bytes(s.mask_rle.data(), s.mask_rle.size());
    w.put_u64(s.payload.size());
    w.put_bytes(s.payload.data(), s.payload.size());
  }
  return w.take();
}

Bitstream deserialize(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, Err::StreamCorrupt);
  const auto magic = r.get_bytes(8);
  if (!std::equal(magic.begin(), magic.begin() + 7, kMagic))
    fail(Err::StreamCorrupt, "bad magic");
  if (magic[7] != kMagic[7]) fail(Err::VersionMismatch, "container format version");
  Bitstream bs;
  bs.header.version = r.get_u8();
  if (bs.header.version != 1) fail(Err::VersionMismatch, "header version");
  const uint8_t vid = r.get_u8();
  if (vid > uint8_t(Variant::fnnoc5)) fail(Err::StreamCorrupt, "variant id");
  bs.header.variant = Variant(vid);
  bs.header.arch_id = r.get_u8();
  arch_from_id(bs.header.arch_id);
  bs.header.bitdepth = r.get_u8();
  if (bs.header.bitdepth < kMinBitdepth || bs.header.bitdepth > kMaxBitdepth)
    fail(Err::StreamCorrupt, "bitdepth " + std::to_string(bs.header.bitdepth));
  bs.header.voxel_count = r.get_u64();
  bs.header.model_hash = r.get_u64();
  bs.base_block = r.get_u64();
  for (int res = 3; res <= bs.header.bitdepth; res++) {
    ResolutionSegment s;
    const uint64_t mlen = r.get_u64();
    auto mb = r.get_bytes(size_t(mlen));
    s.mask_rle.assign(mb.begin(), mb.end());
    const uint64_t plen = r.get_u64();
    auto pb = r.get_bytes(size_t(plen));
    s.payload.assign(pb.begin(), pb.end());
    bs.segments.push_back(std::move(s));
  }
  if (!r.done()) fail(Err::StreamCorrupt, "trailing bytes after the last segment");
  return bs;
}

uint64_t encode_base(const VoxelSet& vs) {
  if (vs.bitdepth != 2)
    fail(Err::WrongBitdepth, "base block needs bitdepth 2, got " +
                                 std::to_string(vs.bitdepth));
  uint64_t block = 0;
  for (const Voxel& v : vs.voxels) block |= uint64_t(1) << (v.z * 16 + v.x * 4 + v.y);
  return block;
}

VoxelSet decode_base(uint64_t block) {
  VoxelSet vs;
  vs.bitdepth = 2;
  for (uint32_t i = 0; i < 64; i++)
    if ((block >> i) & 1) vs.voxels.push_back({(i >> 2) & 3, i & 3, i >> 4});
  std::sort(vs.voxels.begin(), vs.voxels.end(), scan_less);
  return vs;
}

Bitstream encode(const VoxelSet& vs, const ModelParams& m, Variant v,
                 EncodeReport* report, Trace* trace) {
  if (vs.voxels.empty()) fail(Err::EmptyCloud, "nothing to encode");
  check_model(m, v);

  const std::vector<VoxelSet> pyramid = build_pyramid(vs);
  Bitstream bs;
  bs.header.variant = v;
  bs.header.arch_id = arch_to_id(variant_model_config(v));
  bs.header.bitdepth = uint8_t(vs.bitdepth);
  bs.header.voxel_count = vs.size();
  bs.header.model_hash = model_hash(m);
  bs.base_block = encode_base(pyramid[0]);

  for (int r = 3; r <= vs.bitdepth; r++) {
    const VoxelSet& parent = pyramid[r - 3];
    const VoxelSet& truth = pyramid[r - 2];
    const CandidateList cl = gen_candidates(parent);

    ResolutionSegment seg;
    seg.mask_rle = rle_encode(section_mask(cl));

    ArithmeticEncoder enc;
    ResolutionStats st;
    st.r = r;
    st.candidates = cl.entries.size();

    auto code_one = [&](const Voxel& pos, const ContextBits& ctx, float p1) {
      const QuantizedDist d = quantize(p1);
      const bool bit = truth.contains(pos);
      enc.encode(bit, d);
      st.ideal_bits += dist_bits(d, bit);
      if (bit) st.occupied++;
      if (trace) trace->push_back({r, pos, ctx, d, uint8_t(bit)});
      return bit;
    };

    if (variant_is_batched(v)) {
      scan_batched(cl, v,
                   [&](std::span<const Voxel> cands, std::span<const ContextBits> ctxs,
                       std::span<uint8_t> bits) {
                     const std::vector<float> ps = forward(m, ctxs);
                     for (size_t i = 0; i < cands.size(); i++)
                       bits[i] = code_one(cands[i], ctxs[i], ps[i]);
                   });
    } else {
      scan_sequential(cl, v, [&](const Voxel& pos, const ContextBits& ctx) {
        return code_one(pos, ctx, forward_one(m, ctx));
      });
    }

    seg.payload = enc.finish();
    st.mask_bytes = seg.mask_rle.size();
    st.payload_bytes = seg.payload.size();
    if (report) report->per_resolution.push_back(st);
    bs.segments.push_back(std::move(seg));
  }

  if (report) {
    const size_t total = serialize(bs).size();
    report->header_bytes = 28;
    report->total_bytes = total;
    report->bpov = double(total) * 8.0 / double(vs.size());
    report->bpov_payload = double(total - 28) * 8.0 / double(vs.size());
  }
  return bs;
}

VoxelSet decode(const Bitstream& bs, const ModelParams& m, Trace* trace) {
  if (model_hash(m) != bs.header.model_hash)
    fail(Err::HashMismatch, "bitstream was produced with a different model");
  const Variant v = bs.header.variant;
  check_model(m, v);
  if (arch_from_id(bs.header.arch_id) != variant_model_config(v))
    fail(Err::StreamCorrupt, "arch id does not match the variant");
  if (bs.segments.size() != size_t(bs.header.bitdepth - 2))
    fail(Err::StreamCorrupt, "segment count vs bitdepth");

  VoxelSet cur = decode_base(bs.base_block);
  for (int r = 3; r <= bs.header.bitdepth; r++) {
    const ResolutionSegment& seg = bs.segments[r - 3];
    if (cur.voxels.empty()) fail(Err::StreamCorrupt, "no parent voxels at resolution " +
                                                         std::to_string(r));
    const CandidateList cl = gen_candidates(cur);

    // The mask is derivable from the parent level; transmitted anyway, so
    // verify instead of trusting it.
    if (rle_decode(seg.mask_rle, size_t(1) << r) != section_mask(cl))
      fail(Err::MaskInconsistent, "section mask disagrees at resolution " +
                                      std::to_string(r));

    ArithmeticDecoder dec(seg.payload);
    VoxelSet next;
    next.bitdepth = r;

    auto take_bit = [&](const Voxel& pos, const ContextBits& ctx, float p1) {
      const QuantizedDist d = quantize(p1);
      const bool bit = dec.decode(d) != 0;
      if (bit) next.voxels.push_back(pos);
      if (trace) trace->push_back({r, pos, ctx, d, uint8_t(bit)});
      return bit;
    };

    if (variant_is_batched(v)) {
      scan_batched(cl, v,
                   [&](std::span<const Voxel> cands, std::span<const ContextBits> ctxs,
                       std::span<uint8_t> bits) {
                     // One model batch per section, then the bits strictly
                     // in scan order against the precomputed distributions.
                     const std::vector<float> ps = forward(m, ctxs);
                     for (size_t i = 0; i < cands.size(); i++)
                       bits[i] = take_bit(cands[i], ctxs[i], ps[i]);
                   });
    } else {
      scan_sequential(cl, v, [&](const Voxel& pos, const ContextBits& ctx) {
        return take_bit(pos, ctx, forward_one(m, ctx));
      });
    }

    if (dec.bytes_consumed() != seg.payload.size())
      fail(Err::StreamCorrupt, "arithmetic payload has unread bytes at resolution " +
                                   std::to_string(r));
    cur = std::move(next);
  }

  if (cur.size() != bs.header.voxel_count)
    fail(Err::StreamCorrupt, "decoded voxel count " + std::to_string(cur.size()) +
                                 " vs header " + std::to_string(bs.header.voxel_count));
  return cur;
}

double bpov(const Bitstream& bs, const VoxelSet& vs) {
  if (vs.voxels.empty()) fail(Err::EmptyCloud, "bpov of an empty cloud");
  return double(serialize(bs).size()) * 8.0 / double(vs.size());
}

}  // namespace nnoc
