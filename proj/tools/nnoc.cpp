// Command-line surface for the codec: encode, decode, train, collect,
// bench, verify. Exit codes: 0 ok, 2 usage, 3 input error, 4 stream or
// model mismatch, 5 internal invariant violation.

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nnoc/codec.hpp"
#include "nnoc/io.hpp"

namespace {

using namespace nnoc;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

int log_level() {
  static const int lvl = [] {
    const char* e = std::getenv("NNOC_LOG");
    return e ? std::atoi(e) : 0;
  }();
  return lvl;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "nnoc: " << msg << "\n";
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string hex64(uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

ModelParams resolve_model(const std::string& source, Variant v) {
  if (source == "uniform") {
    info("using the uniform model (p = 0.5 everywhere)");
    return uniform_model(context_length(v), variant_model_config(v));
  }
  info("loading model " + source);
  return load_model(read_file(source));
}

// Smallest depth that holds an integer cloud as-is; empty if the data
// needs an explicit target.
std::optional<int> detect_bitdepth(const RawPointCloud& pc) {
  double hi = 0.0;
  for (const auto& p : pc.points)
    for (double v : p) {
      if (!std::isfinite(v) || v < 0.0 || v != std::floor(v)) return std::nullopt;
      hi = std::max(hi, v);
    }
  for (int d = kMinBitdepth; d <= kMaxBitdepth; d++)
    if (hi < double(int64_t(1) << d)) return d;
  return std::nullopt;
}

VoxelSet load_cloud(const std::string& path, int bitdepth) {
  info("reading " + path);
  const RawPointCloud pc = read_ply(path);
  int depth = bitdepth;
  if (depth == 0) {
    const auto d = detect_bitdepth(pc);
    if (!d)
      fail(Err::BitdepthUnsupported,
           path + " has no native voxel depth; pass an explicit --bitdepth");
    depth = *d;
  }
  return requantize(pc, depth);
}

struct CommonArgs {
  std::string variant = "nnoc";
  std::string model = "uniform";
  std::string report = "text";
  int bitdepth = 0;  // 0 = detect from the input
  uint64_t seed = 1;
  int threads = 1;
};

void print_encode_report(const EncodeReport& rep, double secs, bool tsv) {
  if (tsv) {
    std::printf("r\tcandidates\toccupied\tmask_bytes\tpayload_bytes\tideal_bits\n");
    for (const auto& s : rep.per_resolution)
      std::printf("%d\t%" PRIu64 "\t%" PRIu64 "\t%" PRIu64 "\t%" PRIu64 "\t%.2f\n", s.r,
                  s.candidates, s.occupied, s.mask_bytes, s.payload_bytes, s.ideal_bits);
    std::printf("total_bytes\t%" PRIu64 "\n", rep.total_bytes);
    std::printf("bpov\t%.6f\n", rep.bpov);
    std::printf("bpov_no_header\t%.6f\n", rep.bpov_payload);
    std::printf("seconds\t%.3f\n", secs);
    return;
  }
  std::printf("  %3s %12s %12s %12s %14s %14s\n", "r", "candidates", "occupied",
              "mask bytes", "payload bytes", "ideal bits");
  for (const auto& s : rep.per_resolution)
    std::printf("  %3d %12" PRIu64 " %12" PRIu64 " %12" PRIu64 " %14" PRIu64 " %14.2f\n",
                s.r, s.candidates, s.occupied, s.mask_bytes, s.payload_bytes, s.ideal_bits);
  std::printf("total: %" PRIu64 " bytes in %.3f s\n", rep.total_bytes, secs);
  std::printf("bpov:  %.6f with header, %.6f without\n", rep.bpov, rep.bpov_payload);
}

int run_encode(const std::string& in, const std::string& out, const CommonArgs& a) {
  const Variant v = variant_from_name(a.variant);
  const ModelParams m = resolve_model(a.model, v);
  const VoxelSet vs = load_cloud(in, a.bitdepth);
  info("encoding " + std::to_string(vs.size()) + " voxels at depth " +
       std::to_string(vs.bitdepth) + " with " + variant_name(v));
  const auto t0 = Clock::now();
  EncodeReport rep;
  const Bitstream bs = encode(vs, m, v, &rep);
  const double secs = seconds_since(t0);
  write_file(out, serialize(bs));
  print_encode_report(rep, secs, a.report == "tsv");
  return 0;
}

int run_decode(const std::string& in, const std::string& out, const CommonArgs& a) {
  const std::vector<uint8_t> bytes = read_file(in);
  const Bitstream bs = deserialize(bytes);
  const ModelParams m = resolve_model(a.model, bs.header.variant);
  const auto t0 = Clock::now();
  const VoxelSet vs = decode(bs, m);
  const double secs = seconds_since(t0);
  write_ply(vs, out);
  std::printf("decoded %zu voxels at depth %d (%s) in %.3f s\n", vs.size(),
              vs.bitdepth, variant_name(bs.header.variant), secs);
  return 0;
}

int run_verify(const std::string& in, const CommonArgs& a) {
  const Variant v = variant_from_name(a.variant);
  const ModelParams m = resolve_model(a.model, v);
  const VoxelSet vs = load_cloud(in, a.bitdepth);
  const Bitstream bs = deserialize(serialize(encode(vs, m, v)));
  const VoxelSet back = decode(bs, m);
  if (back == vs) {
    std::printf("LOSSLESS: OK (%zu voxels, %.6f bpov)\n", vs.size(), bpov(bs, vs));
    return 0;
  }
  std::printf("LOSSLESS: FAIL (%zu voxels in, %zu out)\n", vs.size(), back.size());
  return 5;
}

int run_collect(const std::vector<std::string>& inputs, const std::string& out,
                const CommonArgs& a) {
  const Variant v = variant_from_name(a.variant);
  ContextHistogram hist;
  hist.variant = v;
  for (const std::string& path : inputs) {
    const VoxelSet vs = load_cloud(path, a.bitdepth);
    merge_histogram(hist, collect_training_contexts(build_pyramid(vs), v));
  }
  write_file(out, save_histogram(hist));
  uint64_t lo = UINT64_MAX, hi = 0;
  for (const auto& [c, e] : hist.entries) {
    lo = std::min(lo, e.no0 + e.no1);
    hi = std::max(hi, e.no0 + e.no1);
  }
  if (hist.entries.empty()) lo = 0;
  std::printf("%s: %zu unique contexts, %" PRIu64 " occurrences, counts %" PRIu64
              "..%" PRIu64 "\n",
              variant_name(v), hist.entries.size(), hist.total(), lo, hi);
  return 0;
}

int run_train(const std::string& hist_path, const std::string& val_path,
              const std::string& out, TrainConfig tc, const CommonArgs& a) {
  const ContextHistogram hist = load_histogram(read_file(hist_path));
  ContextHistogram val;
  val.variant = hist.variant;
  if (!val_path.empty()) {
    val = load_histogram(read_file(val_path));
    if (val.variant != hist.variant)
      fail(Err::ModelVariantMismatch, "training and validation histograms disagree");
  }
  tc.seed = a.seed;
  std::vector<EpochStats> log;
  const auto t0 = Clock::now();
  const ModelParams m = train(hist, val, variant_model_config(hist.variant), tc, &log);
  const double secs = seconds_since(t0);

  const bool tsv = a.report == "tsv";
  if (tsv) std::printf("epoch\ttrain_bits\tval_bits\tbest\n");
  for (const auto& e : log) {
    if (tsv)
      std::printf("%d\t%.6f\t%.6f\t%d\n", e.epoch, e.train_bits_per_occ,
                  e.val_bits_per_occ, int(e.best));
    else
      std::printf("epoch %3d  train %.6f  val %.6f%s\n", e.epoch, e.train_bits_per_occ,
                  e.val_bits_per_occ, e.best ? "  *" : "");
  }
  write_file(out, save_model(m));
  std::printf("%s: %zu parameters, hash %s, %.1f s\n", variant_name(hist.variant),
              m.param_count(), hex64(model_hash(m)).c_str(), secs);
  return 0;
}

int run_bench(const std::string& dir, const std::string& baseline_path,
              const CommonArgs& a) {
  const Variant v = variant_from_name(a.variant);
  const ModelParams m = resolve_model(a.model, v);

  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ply")
      files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(Err::IoFailure, "no .ply files in " + dir);

  // Optional baseline: lines of "<name><TAB><bpov>" keyed by file stem.
  std::vector<std::pair<std::string, double>> baseline;
  if (!baseline_path.empty()) {
    const std::vector<uint8_t> raw = read_file(baseline_path);
    std::string text(raw.begin(), raw.end());
    size_t pos = 0;
    while (pos < text.size()) {
      size_t nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      const std::string line = text.substr(pos, nl - pos);
      pos = nl + 1;
      const size_t tab = line.find('\t');
      if (tab != std::string::npos)
        baseline.emplace_back(line.substr(0, tab), std::atof(line.c_str() + tab + 1));
    }
  }
  auto base_for = [&](const std::string& stem) -> std::optional<double> {
    for (const auto& [name, b] : baseline)
      if (name == stem) return b;
    return std::nullopt;
  };

  const bool tsv = a.report == "tsv";
  if (tsv)
    std::printf("cloud\tvoxels\tbits\tbpov\tbpov_no_header\tgain\tseconds\n");
  else
    std::printf("  %-24s %10s %12s %10s %10s %8s\n", "cloud", "voxels", "bits", "bpov",
                "gain", "seconds");
  double sum_bpov = 0.0, sum_gain = 0.0;
  size_t n_gain = 0;
  for (const std::string& path : files) {
    const VoxelSet vs = load_cloud(path, a.bitdepth);
    const auto t0 = Clock::now();
    EncodeReport rep;
    encode(vs, m, v, &rep);
    const double secs = seconds_since(t0);
    const std::string stem = fs::path(path).stem().string();
    const auto base = base_for(stem);
    const double gain = base ? (1.0 - rep.bpov / *base) * 100.0 : 0.0;
    if (base) {
      sum_gain += gain;
      n_gain++;
    }
    sum_bpov += rep.bpov;
    if (tsv)
      std::printf("%s\t%zu\t%" PRIu64 "\t%.6f\t%.6f\t%s\t%.3f\n", stem.c_str(), vs.size(),
                  rep.total_bytes * 8, rep.bpov, rep.bpov_payload,
                  base ? std::to_string(gain).c_str() : "-", secs);
    else
      std::printf("  %-24s %10zu %12" PRIu64 " %10.4f %9s%% %8.2f\n", stem.c_str(),
                  vs.size(), rep.total_bytes * 8, rep.bpov,
                  base ? std::to_string(gain).substr(0, 6).c_str() : "-", secs);
  }
  std::printf(tsv ? "average\t\t\t%.6f\t\t%s\t\n" : "average bpov %.4f%s\n",
              sum_bpov / double(files.size()),
              n_gain ? ("  gain " + std::to_string(sum_gain / double(n_gain)) + "%").c_str()
                     : "");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nnoc - lossless octree point-cloud geometry codec"};
  app.require_subcommand(1);

  CommonArgs a;
  app.add_option("--seed", a.seed, "seed for all randomness (init, shuffling)");
  app.add_option("--threads", a.threads, "worker cap (evaluation is sequential)")
      ->check(CLI::PositiveNumber);
  app.add_option("--report", a.report, "report format")
      ->check(CLI::IsMember({"text", "tsv"}));

  const std::vector<std::string> variants = {"nnoc",   "fnnoc",  "fnnoc1", "fnnoc2",
                                             "fnnoc3", "fnnoc4", "fnnoc5"};

  // Global options (--seed, --report, ...) may appear after the
  // subcommand name; unmatched arguments bubble up for matching.
  auto sub = [&](const char* name, const char* help) {
    CLI::App* c = app.add_subcommand(name, help);
    c->fallthrough();
    return c;
  };

  std::string in, out, val_path, baseline;
  std::vector<std::string> inputs;
  TrainConfig tc;

  auto add_variant = [&](CLI::App* c) {
    c->add_option("--variant", a.variant, "context template / architecture")
        ->check(CLI::IsMember(variants));
  };
  auto add_model = [&](CLI::App* c) {
    c->add_option("--model", a.model, "model file, or 'uniform'");
  };
  auto add_depth = [&](CLI::App* c) {
    c->add_option("--bitdepth", a.bitdepth, "requantize to this depth (default: detect)")
        ->check(CLI::Range(0, 16));
  };

  CLI::App* enc = sub("encode", "compress a point cloud");
  enc->add_option("input", in, "input .ply")->required();
  enc->add_option("output", out, "output bitstream")->required();
  add_variant(enc);
  add_model(enc);
  add_depth(enc);

  CLI::App* dec = sub("decode", "reconstruct a point cloud");
  dec->add_option("input", in, "input bitstream")->required();
  dec->add_option("output", out, "output .ply")->required();
  add_model(dec);

  CLI::App* ver = sub("verify", "encode, decode, compare");
  ver->add_option("input", in, "input .ply")->required();
  add_variant(ver);
  add_model(ver);
  add_depth(ver);

  CLI::App* col = sub("collect", "build a context histogram");
  col->add_option("inputs", inputs, "input .ply files")->required();
  col->add_option("--output", out, "output histogram file")->required();
  add_variant(col);
  add_depth(col);

  CLI::App* trn = sub("train", "train a model from histograms");
  trn->add_option("hist", in, "training histogram")->required();
  trn->add_option("--val", val_path, "validation histogram");
  trn->add_option("--output", out, "output model file")->required();
  trn->add_option("--batch-size", tc.batch_size, "contexts per ADAM step");
  trn->add_option("--patience", tc.patience, "epochs without improvement before stopping");
  trn->add_option("--max-epochs", tc.max_epochs, "epoch cap");
  trn->add_option("--lr", tc.lr, "ADAM step size");

  CLI::App* ben = sub("bench", "encode every cloud in a directory");
  ben->add_option("dataset", in, "directory of .ply files")->required();
  ben->add_option("--baseline", baseline, "TSV of <cloud>\\t<bpov> for the gain column");
  add_variant(ben);
  add_model(ben);
  add_depth(ben);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (enc->parsed()) return run_encode(in, out, a);
    if (dec->parsed()) return run_decode(in, out, a);
    if (ver->parsed()) return run_verify(in, a);
    if (col->parsed()) return run_collect(inputs, out, a);
    if (trn->parsed()) return run_train(in, val_path, out, tc, a);
    if (ben->parsed()) return run_bench(in, baseline, a);
  } catch (const nnoc::Error& e) {
    std::cerr << "nnoc: error: " << e.what() << "\n";
    return int(e.cls());
  } catch (const std::exception& e) {
    std::cerr << "nnoc: internal error: " << e.what() << "\n";
    return 5;
  }
  return 2;
}
