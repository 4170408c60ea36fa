#include "nnoc/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string_view>

#include "nnoc/bytes.hpp"

namespace nnoc {

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) fail(Err::IoFailure, "cannot open " + path);
  const std::streamsize n = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> data(static_cast<size_t>(n));
  if (n && !f.read(reinterpret_cast<char*>(data.data()), n))
    fail(Err::IoFailure, "cannot read " + path);
  return data;
}

void write_file(const std::string& path, std::span<const uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(Err::IoFailure, "cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!f) fail(Err::IoFailure, "cannot write " + path);
}

namespace {

enum class PType { i8, u8, i16, u16, i32, u32, f32, f64 };

PType ptype_from_name(std::string_view s, const std::string& path) {
  if (s == "char" || s == "int8") return PType::i8;
  if (s == "uchar" || s == "uint8") return PType::u8;
  if (s == "short" || s == "int16") return PType::i16;
  if (s == "ushort" || s == "uint16") return PType::u16;
  if (s == "int" || s == "int32") return PType::i32;
  if (s == "uint" || s == "uint32") return PType::u32;
  if (s == "float" || s == "float32") return PType::f32;
  if (s == "double" || s == "float64") return PType::f64;
  fail(Err::MalformedHeader, path + ": unknown property type '" + std::string(s) + "'");
}

size_t ptype_size(PType t) {
  switch (t) {
    case PType::i8:
    case PType::u8: return 1;
    case PType::i16:
    case PType::u16: return 2;
    case PType::i32:
    case PType::u32: return 4;
    case PType::f32: return 4;
    case PType::f64: return 8;
  }
  return 0;
}

struct Prop {
  std::string name;
  PType type = PType::f32;
  bool list = false;
  PType count_type = PType::u8;
};

struct Elem {
  std::string name;
  uint64_t count = 0;
  std::vector<Prop> props;
};

// Pulls one scalar out of a binary little-endian cursor.
double read_binary(std::span<const uint8_t> data, size_t& pos, PType t, const std::string& path) {
  const size_t n = ptype_size(t);
  if (data.size() - pos < n) fail(Err::MalformedHeader, path + ": truncated binary data");
  const uint8_t* b = data.data() + pos;
  pos += n;
  uint64_t raw = 0;
  for (size_t i = 0; i < n; i++) raw |= uint64_t(b[i]) << (8 * i);
  switch (t) {
    case PType::i8: return double(int8_t(raw));
    case PType::u8: return double(uint8_t(raw));
    case PType::i16: return double(int16_t(raw));
    case PType::u16: return double(uint16_t(raw));
    case PType::i32: return double(int32_t(raw));
    case PType::u32: return double(uint32_t(raw));
    case PType::f32: {
      float v;
      uint32_t bits = uint32_t(raw);
      std::memcpy(&v, &bits, 4);
      return double(v);
    }
    case PType::f64: {
      double v;
      std::memcpy(&v, &raw, 8);
      return v;
    }
  }
  return 0.0;
}

struct AsciiCursor {
  std::string_view text;
  size_t pos = 0;

  double next(const std::string& path) {
    while (pos < text.size() && std::isspace(uint8_t(text[pos]))) pos++;
    if (pos >= text.size()) fail(Err::MalformedHeader, path + ": truncated ascii data");
    size_t end = pos;
    while (end < text.size() && !std::isspace(uint8_t(text[end]))) end++;
    double v = 0.0;
    auto res = std::from_chars(text.data() + pos, text.data() + end, v);
    if (res.ec != std::errc() || res.ptr != text.data() + end)
      fail(Err::MalformedHeader,
           path + ": bad ascii value '" + std::string(text.substr(pos, end - pos)) + "'");
    pos = end;
    return v;
  }
};

}  // namespace

RawPointCloud read_ply(const std::string& path) {
  const std::vector<uint8_t> data = read_file(path);
  std::string_view text(reinterpret_cast<const char*>(data.data()), data.size());

  // --- header ---
  size_t pos = 0;
  auto next_line = [&]() -> std::string_view {
    if (pos >= text.size()) fail(Err::MalformedHeader, path + ": header never ends");
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = std::min(nl + 1, text.size());
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return line;
  };
  auto split = [](std::string_view line) {
    std::vector<std::string_view> toks;
    size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && line[i] == ' ') i++;
      size_t j = i;
      while (j < line.size() && line[j] != ' ') j++;
      if (j > i) toks.push_back(line.substr(i, j - i));
      i = j;
    }
    return toks;
  };

  if (next_line() != "ply") fail(Err::MalformedHeader, path + ": missing 'ply' magic");
  bool binary = false, have_format = false;
  std::vector<Elem> elems;
  while (true) {
    const auto toks = split(next_line());
    if (toks.empty()) continue;
    if (toks[0] == "end_header") break;
    if (toks[0] == "comment" || toks[0] == "obj_info") continue;
    if (toks[0] == "format") {
      if (toks.size() < 2) fail(Err::MalformedHeader, path + ": bad format line");
      if (toks[1] == "ascii")
        binary = false;
      else if (toks[1] == "binary_little_endian")
        binary = true;
      else if (toks[1] == "binary_big_endian")
        fail(Err::UnsupportedPlyVariant, path + ": big-endian PLY");
      else
        fail(Err::MalformedHeader, path + ": unknown format '" + std::string(toks[1]) + "'");
      have_format = true;
    } else if (toks[0] == "element") {
      if (toks.size() != 3) fail(Err::MalformedHeader, path + ": bad element line");
      Elem e;
      e.name = std::string(toks[1]);
      uint64_t cnt = 0;
      auto res = std::from_chars(toks[2].data(), toks[2].data() + toks[2].size(), cnt);
      if (res.ec != std::errc()) fail(Err::MalformedHeader, path + ": bad element count");
      e.count = cnt;
      elems.push_back(std::move(e));
    } else if (toks[0] == "property") {
      if (elems.empty()) fail(Err::MalformedHeader, path + ": property before any element");
      Prop p;
      if (toks.size() == 5 && toks[1] == "list") {
        p.list = true;
        p.count_type = ptype_from_name(toks[2], path);
        p.type = ptype_from_name(toks[3], path);
        p.name = std::string(toks[4]);
      } else if (toks.size() == 3) {
        p.type = ptype_from_name(toks[1], path);
        p.name = std::string(toks[2]);
      } else {
        fail(Err::MalformedHeader, path + ": bad property line");
      }
      elems.back().props.push_back(std::move(p));
    } else {
      fail(Err::MalformedHeader, path + ": unknown header line '" + std::string(toks[0]) + "'");
    }
  }
  if (!have_format) fail(Err::MalformedHeader, path + ": missing format line");

  int xi = -1, yi = -1, zi = -1;
  size_t vertex_elem = elems.size();
  for (size_t e = 0; e < elems.size(); e++) {
    if (elems[e].name != "vertex") continue;
    vertex_elem = e;
    for (size_t i = 0; i < elems[e].props.size(); i++) {
      const Prop& p = elems[e].props[i];
      if (p.list) continue;
      if (p.name == "x") xi = int(i);
      if (p.name == "y") yi = int(i);
      if (p.name == "z") zi = int(i);
    }
    break;
  }
  if (vertex_elem == elems.size() || xi < 0 || yi < 0 || zi < 0)
    fail(Err::MalformedHeader, path + ": no vertex element with scalar x, y, z");

  // --- data: walk elements in declared order, keep vertex coordinates ---
  RawPointCloud pc;
  AsciiCursor ac{text, pos};
  for (size_t e = 0; e <= vertex_elem; e++) {
    const Elem& el = elems[e];
    const bool keep = (e == vertex_elem);
    if (keep) pc.points.reserve(size_t(el.count));
    for (uint64_t row = 0; row < el.count; row++) {
      std::array<double, 3> pt{0, 0, 0};
      for (size_t i = 0; i < el.props.size(); i++) {
        const Prop& p = el.props[i];
        if (p.list) {
          const double n = binary ? read_binary(data, pos, p.count_type, path)
                                  : ac.next(path);
          if (n < 0 || n > 1e9) fail(Err::MalformedHeader, path + ": bad list count");
          for (uint64_t k = 0; k < uint64_t(n); k++)
            binary ? read_binary(data, pos, p.type, path) : ac.next(path);
          continue;
        }
        const double v = binary ? read_binary(data, pos, p.type, path) : ac.next(path);
        if (keep) {
          if (int(i) == xi) pt[0] = v;
          if (int(i) == yi) pt[1] = v;
          if (int(i) == zi) pt[2] = v;
        }
      }
      if (keep) pc.points.push_back(pt);
    }
  }
  return pc;
}

void write_ply(const VoxelSet& vs, const std::string& path) {
  ByteWriter w;
  const std::string header = "ply\nformat binary_little_endian 1.0\nelement vertex " +
                             std::to_string(vs.size()) +
                             "\nproperty float x\nproperty float y\nproperty float z\n"
                             "end_header\n";
  w.put_bytes(header.data(), header.size());
  for (const Voxel& v : vs.voxels) {
    w.put_f32(float(v.x));
    w.put_f32(float(v.y));
    w.put_f32(float(v.z));
  }
  write_file(path, w.bytes());
}

VoxelSet requantize(const RawPointCloud& pc, int target_bitdepth) {
  if (target_bitdepth < kMinBitdepth || target_bitdepth > kMaxBitdepth)
    fail(Err::BitdepthUnsupported, std::to_string(target_bitdepth));
  if (pc.points.empty()) fail(Err::EmptyCloud, "no points to requantize");

  bool integral = true;
  double lo = pc.points[0][0], hi = lo;
  std::array<double, 3> mins = pc.points[0], maxs = pc.points[0];
  for (const auto& p : pc.points)
    for (int a = 0; a < 3; a++) {
      const double v = p[a];
      if (!std::isfinite(v) || v != std::floor(v) || std::abs(v) > 0x1p53) integral = false;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      mins[a] = std::min(mins[a], v);
      maxs[a] = std::max(maxs[a], v);
    }

  std::vector<std::array<int64_t, 3>> pts;
  pts.reserve(pc.points.size());
  const double limit = double(int64_t(1) << target_bitdepth);

  if (integral && lo >= 0.0 && hi < limit) {
    // Already a voxel grid at (or under) the target depth.
    for (const auto& p : pc.points)
      pts.push_back({int64_t(p[0]), int64_t(p[1]), int64_t(p[2])});
  } else if (integral && lo >= 0.0) {
    // A deeper voxel grid: floor-halve per excess bit, exactly like the
    // octree downsample, so prepared datasets and pyramids agree.
    int depth = target_bitdepth;
    while (depth < 63 && hi >= double(int64_t(1) << depth)) depth++;
    const int shift = depth - target_bitdepth;
    for (const auto& p : pc.points)
      pts.push_back({int64_t(p[0]) >> shift, int64_t(p[1]) >> shift, int64_t(p[2]) >> shift});
  } else {
    // Raw coordinates: shift to the origin and scale so the widest axis
    // spans [0, 2^target - 1] before flooring.
    double extent = 0.0;
    for (int a = 0; a < 3; a++) extent = std::max(extent, maxs[a] - mins[a]);
    if (extent <= 0.0) fail(Err::DegenerateExtent, "all points coincide");
    const double scale = (limit - 1.0) / extent;
    const int64_t top = (int64_t(1) << target_bitdepth) - 1;
    for (const auto& p : pc.points) {
      std::array<int64_t, 3> q;
      for (int a = 0; a < 3; a++)
        q[a] = std::clamp(int64_t(std::floor((p[a] - mins[a]) * scale)), int64_t(0), top);
      pts.push_back(q);
    }
  }
  return voxelize(pts, target_bitdepth);
}

}  // namespace nnoc
