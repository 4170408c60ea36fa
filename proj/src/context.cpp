#include "nnoc/context.hpp"

#include <algorithm>
#include <cctype>

#include "nnoc/bytes.hpp"

namespace nnoc {

Variant variant_from_name(std::string_view name) {
  std::string s(name);
  for (char& c : s) c = char(std::tolower(uint8_t(c)));
  if (s == "nnoc") return Variant::nnoc;
  if (s == "fnnoc") return Variant::fnnoc;
  if (s == "fnnoc1") return Variant::fnnoc1;
  if (s == "fnnoc2") return Variant::fnnoc2;
  if (s == "fnnoc3") return Variant::fnnoc3;
  if (s == "fnnoc4") return Variant::fnnoc4;
  if (s == "fnnoc5") return Variant::fnnoc5;
  fail(Err::UnknownVariant, std::string(name));
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::nnoc: return "nnoc";
    case Variant::fnnoc: return "fnnoc";
    case Variant::fnnoc1: return "fnnoc1";
    case Variant::fnnoc2: return "fnnoc2";
    case Variant::fnnoc3: return "fnnoc3";
    case Variant::fnnoc4: return "fnnoc4";
    case Variant::fnnoc5: return "fnnoc5";
  }
  fail(Err::UnknownVariant, "id " + std::to_string(int(v)));
}

bool variant_is_batched(Variant v) { return v != Variant::nnoc; }

namespace {

// fnnoc4/fnnoc5 differ from fnnoc only in the network, not the template.
Variant template_key(Variant v) {
  return (v == Variant::fnnoc4 || v == Variant::fnnoc5) ? Variant::fnnoc : v;
}

std::vector<ContextOffset> build_offsets(Variant v) {
  int dz_lo = -2, dz_hi = 1, xy = 2;
  switch (v) {
    case Variant::fnnoc1: dz_hi = 0; break;              // drop the future section
    case Variant::fnnoc2: dz_lo = -1; dz_hi = 0; break;  // drop dz=-2 as well
    case Variant::fnnoc3: xy = 1; break;                 // 3x3 cross-sections
    default: break;
  }
  const bool causal_split = (v == Variant::nnoc);
  std::vector<ContextOffset> out;
  for (int dz = dz_lo; dz <= dz_hi; dz++)
    for (int dx = -xy; dx <= xy; dx++)
      for (int dy = -xy; dy <= xy; dy++) {
        OffsetState st;
        if (dz < 0)
          st = OffsetState::past_occupancy;
        else if (dz > 0)
          st = OffsetState::candidacy;
        else if (causal_split && (dx < 0 || (dx == 0 && dy < 0)))
          st = OffsetState::scanned_occupancy;  // scanned before (0,0) in row/column order
        else
          st = OffsetState::candidacy;
        out.push_back({int8_t(dx), int8_t(dy), int8_t(dz), st});
      }
  return out;
}

}  // namespace

std::span<const ContextOffset> template_offsets(Variant v) {
  static const std::vector<ContextOffset> tables[5] = {
      build_offsets(Variant::nnoc), build_offsets(Variant::fnnoc),
      build_offsets(Variant::fnnoc1), build_offsets(Variant::fnnoc2),
      build_offsets(Variant::fnnoc3)};
  return tables[int(template_key(v))];
}

int context_length(Variant v) { return int(template_offsets(v).size()); }

ContextBits extract_context(const SectionBuffer& buf, const Voxel& pos, Variant v) {
  if (pos.z != buf.z0())
    fail(Err::SectionMismatch, "position z=" + std::to_string(pos.z) +
                                   " vs buffer section " + std::to_string(buf.z0()));
  if (!buf.cur_cand().get(pos.x, pos.y))
    fail(Err::PositionNotCandidate, "(" + std::to_string(pos.x) + ", " +
                                        std::to_string(pos.y) + ", " +
                                        std::to_string(pos.z) + ")");
  const std::span<const ContextOffset> offs = template_offsets(v);
  const int64_t n = int64_t(1) << buf.bitdepth();
  ContextBits ctx;
  ctx.len = uint8_t(offs.size());
  for (size_t k = 0; k < offs.size(); k++) {
    const ContextOffset& o = offs[k];
    const int64_t x = int64_t(pos.x) + o.dx;
    const int64_t y = int64_t(pos.y) + o.dy;
    if (x < 0 || x >= n || y < 0 || y >= n) continue;  // outside the cube reads 0
    if (o.dz < 0) {
      const int64_t z = int64_t(pos.z) + o.dz;
      if (z < 0) continue;
      const SectionImage& img = (o.dz == -2) ? buf.past2() : buf.past1();
      if (img.get(uint32_t(x), uint32_t(y))) ctx.set(int(k));
    } else if (o.dz == 0) {
      const SectionImage& img = (o.state == OffsetState::scanned_occupancy)
                                    ? buf.cur_occ()
                                    : buf.cur_cand();
      if (img.get(uint32_t(x), uint32_t(y))) ctx.set(int(k));
    } else {
      const int64_t z = int64_t(pos.z) + o.dz;
      if (z >= n) continue;
      if (buf.next_cand().get(uint32_t(x), uint32_t(y))) ctx.set(int(k));
    }
  }
  return ctx;
}

uint64_t ContextHistogram::total() const {
  uint64_t t = 0;
  for (const auto& [c, e] : entries) t += e.no0 + e.no1;
  return t;
}

std::vector<std::pair<ContextBits, ContextCounts>> ContextHistogram::sorted_entries() const {
  std::vector<std::pair<ContextBits, ContextCounts>> v(entries.begin(), entries.end());
  std::sort(v.begin(), v.end(),
            [](const auto& a, const auto& b) { return context_less(a.first, b.first); });
  return v;
}

void merge_histogram(ContextHistogram& into, const ContextHistogram& from) {
  if (into.variant != from.variant)
    fail(Err::Internal, "merging histograms of different variants");
  for (const auto& [c, e] : from.entries) {
    auto& d = into.entries[c];
    d.no0 += e.no0;
    d.no1 += e.no1;
  }
}

ContextHistogram collect_training_contexts(const std::vector<VoxelSet>& pyramid, Variant v) {
  ContextHistogram hist;
  hist.variant = v;
  for (size_t i = 1; i < pyramid.size(); i++) {
    const VoxelSet& parent = pyramid[i - 1];
    const VoxelSet& truth = pyramid[i];
    if (parent.voxels.empty()) continue;
    const CandidateList cl = gen_candidates(parent);
    if (variant_is_batched(v)) {
      scan_batched(cl, v,
                   [&](std::span<const Voxel> cands, std::span<const ContextBits> ctxs,
                       std::span<uint8_t> bits) {
                     for (size_t j = 0; j < cands.size(); j++) {
                       const bool bit = truth.contains(cands[j]);
                       hist.add(ctxs[j], bit);
                       bits[j] = bit;
                     }
                   });
    } else {
      scan_sequential(cl, v, [&](const Voxel& pos, const ContextBits& ctx) {
        const bool bit = truth.contains(pos);
        hist.add(ctx, bit);
        return bit;
      });
    }
  }
  return hist;
}

std::vector<uint8_t> save_histogram(const ContextHistogram& h) {
  ByteWriter w;
  w.put_u8(uint8_t(h.variant));
  const int len = context_length(h.variant);
  w.put_u16(uint16_t(len));
  w.put_u64(h.entries.size());
  const size_t nbytes = size_t(len + 7) / 8;
  for (const auto& [c, e] : h.sorted_entries()) {
    for (size_t j = 0; j < nbytes; j++)
      w.put_u8(uint8_t(c.w[j >> 3] >> ((j & 7) * 8)));
    w.put_u64(e.no0);
    w.put_u64(e.no1);
  }
  return w.take();
}

ContextHistogram load_histogram(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, Err::StreamCorrupt);
  const uint8_t vid = r.get_u8();
  if (vid > uint8_t(Variant::fnnoc5))
    fail(Err::StreamCorrupt, "histogram variant id " + std::to_string(vid));
  ContextHistogram h;
  h.variant = Variant(vid);
  const int len = context_length(h.variant);
  if (r.get_u16() != len)
    fail(Err::StreamCorrupt, "histogram context length does not match its variant");
  const uint64_t count = r.get_u64();
  const size_t nbytes = size_t(len + 7) / 8;
  if (r.remaining() != count * (nbytes + 16))
    fail(Err::StreamCorrupt, "histogram size does not match its entry count");
  h.entries.reserve(count);
  for (uint64_t i = 0; i < count; i++) {
    ContextBits c;
    c.len = uint8_t(len);
    for (size_t j = 0; j < nbytes; j++)
      c.w[j >> 3] |= uint64_t(r.get_u8()) << ((j & 7) * 8);
    for (int k = len; k < int(nbytes * 8); k++)
      if (c.get(k)) fail(Err::StreamCorrupt, "histogram context has bits past its length");
    ContextCounts e{r.get_u64(), r.get_u64()};
    if (e.no0 + e.no1 == 0) fail(Err::StreamCorrupt, "histogram entry with zero counts");
    h.entries[c] = e;
  }
  return h;
}

}  // namespace nnoc
