#include "nnoc/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>

#include "nnoc/bytes.hpp"

namespace nnoc {

namespace {

constexpr float kPFloor = 0x1p-24f;  // coding-path clamp
constexpr double kLossFloor = 1e-7;  // loss-path clamp
constexpr double kLn2 = 0.6931471805599453094;

// Hidden width is 2*n_C; these bounds keep the stack scratch buffers of
// the 32-bit path honest for every template (n_C tops out at 100).
constexpr int kMaxInputs = 128;
constexpr int kMaxHidden = 256;

void check_dims(int n_C, int n_hidden) {
  if (n_C < 1 || n_C > kMaxInputs || n_hidden != 2 * n_C || n_hidden > kMaxHidden)
    fail(Err::Internal, "model dimensions n_C=" + std::to_string(n_C) +
                            " n_hidden=" + std::to_string(n_hidden));
}

int set_bits(const ContextBits& c, int* idx) {
  int n = 0;
  for (int word = 0; word < 2; word++) {
    uint64_t w = c.w[word];
    while (w) {
      idx[n++] = word * 64 + std::countr_zero(w);
      w &= w - 1;
    }
  }
  return n;
}

double uniform01(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1p-53;
}

}  // namespace

ModelConfig variant_model_config(Variant v) {
  switch (v) {
    case Variant::fnnoc4: return {Arch::sigmoid1, 1};
    case Variant::fnnoc5: return {Arch::softmax2, 2};
    default: return {Arch::softmax2, 1};
  }
}

size_t ModelParams::param_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size() + wo.size() + bo.size();
}

namespace {

// Zeroed parameters of the right shape, any width; the public entry
// points restrict n_C to the template lengths.
ModelParams zero_shape(int n_C, ModelConfig cfg) {
  ModelParams m;
  m.arch = cfg.arch;
  m.n_layers = cfg.n_layers;
  m.n_C = n_C;
  m.n_hidden = 2 * n_C;
  m.n_out = (cfg.arch == Arch::softmax2) ? 2 : 1;
  m.w1.assign(size_t(m.n_hidden) * n_C, 0.0f);
  m.b1.assign(m.n_hidden, 0.0f);
  if (m.n_layers == 2) {
    m.w2.assign(size_t(m.n_hidden) * m.n_hidden, 0.0f);
    m.b2.assign(m.n_hidden, 0.0f);
  }
  m.wo.assign(size_t(m.n_out) * m.n_hidden, 0.0f);
  m.bo.assign(m.n_out, 0.0f);
  return m;
}

}  // namespace

ModelParams uniform_model(int n_C, ModelConfig cfg) {
  if (n_C != 100 && n_C != 75 && n_C != 50 && n_C != 36)
    fail(Err::UnsupportedContextLength, std::to_string(n_C));
  return zero_shape(n_C, cfg);
}

ModelParams init_model(int n_C, ModelConfig cfg, uint64_t seed) {
  ModelParams m = uniform_model(n_C, cfg);
  std::mt19937_64 rng(seed);
  // Scaled-uniform (Glorot) weights drawn matrix by matrix in storage
  // order; biases stay zero. The draw uses the top 53 generator bits
  // directly so the parameter stream is identical on every platform.
  auto fill = [&](std::vector<float>& w, int fan_in, int fan_out) {
    const double bound = std::sqrt(6.0 / (double(fan_in) + double(fan_out)));
    for (float& x : w) x = float((2.0 * uniform01(rng) - 1.0) * bound);
  };
  fill(m.w1, m.n_C, m.n_hidden);
  if (m.n_layers == 2) fill(m.w2, m.n_hidden, m.n_hidden);
  fill(m.wo, m.n_hidden, m.n_out);
  return m;
}

// The deterministic 32-bit forward pass. Hidden pre-activations start at
// the bias and accumulate the weights of set context bits in ascending
// bit order; dense layers accumulate in ascending unit order. This exact
// order is a bitstream compatibility contract, not a style choice.
float forward_one(const ModelParams& m, const ContextBits& c) {
  if (int(c.len) != m.n_C)
    fail(Err::LengthMismatch, "context length " + std::to_string(c.len) +
                                  " vs model n_C " + std::to_string(m.n_C));
  check_dims(m.n_C, m.n_hidden);
  int idx[kMaxInputs];
  const int nset = set_bits(c, idx);
  const int H = m.n_hidden;

  float r[kMaxHidden];
  for (int h = 0; h < H; h++) {
    float a = m.b1[h];
    const float* row = m.w1.data() + size_t(h) * m.n_C;
    for (int s = 0; s < nset; s++) a += row[idx[s]];
    r[h] = a > 0.0f ? a : 0.0f;
  }
  if (m.n_layers == 2) {
    float r2[kMaxHidden];
    for (int g = 0; g < H; g++) {
      float a = m.b2[g];
      const float* row = m.w2.data() + size_t(g) * H;
      for (int h = 0; h < H; h++) a += row[h] * r[h];
      r2[g] = a > 0.0f ? a : 0.0f;
    }
    std::copy(r2, r2 + H, r);
  }
  float alpha[2] = {0.0f, 0.0f};
  for (int o = 0; o < m.n_out; o++) {
    float a = m.bo[o];
    const float* row = m.wo.data() + size_t(o) * H;
    for (int h = 0; h < H; h++) a += row[h] * r[h];
    alpha[o] = a;
  }
  const float u = (m.arch == Arch::softmax2) ? alpha[0] - alpha[1] : alpha[0];
  float p = 1.0f / (1.0f + std::exp(-u));
  return std::min(std::max(p, kPFloor), 1.0f - kPFloor);
}

std::vector<float> forward(const ModelParams& m, std::span<const ContextBits> batch) {
  std::vector<float> out;
  out.reserve(batch.size());
  for (const ContextBits& c : batch) out.push_back(forward_one(m, c));
  return out;
}

double loss_bits(std::span<const float> p1, std::span<const ContextCounts> counts) {
  if (p1.size() != counts.size())
    fail(Err::LengthMismatch, std::to_string(p1.size()) + " probabilities vs " +
                                  std::to_string(counts.size()) + " count pairs");
  double bits = 0.0;
  for (size_t i = 0; i < p1.size(); i++) {
    if (!(p1[i] > 0.0f) || !(p1[i] < 1.0f))
      fail(Err::DegenerateProbability, std::to_string(p1[i]));
    const double p = std::min(std::max(double(p1[i]), kLossFloor), 1.0 - kLossFloor);
    bits -= (double(counts[i].no0) * std::log2(1.0 - p) +
             double(counts[i].no1) * std::log2(p));
  }
  return bits;
}

QuantizedDist quantize(float p1) {
  long c1 = std::lround(double(p1) * double(kProbTotal));
  c1 = std::min(std::max(c1, 1L), long(kProbTotal) - 1);
  return {uint16_t(kProbTotal - c1), uint16_t(c1)};
}

Mlp64::Mlp64(int n_C, ModelConfig cfg) : n_C_(n_C), cfg_(cfg) {
  n_hidden_ = 2 * n_C;
  check_dims(n_C, n_hidden_);
  n_out_ = (cfg.arch == Arch::softmax2) ? 2 : 1;
  o_w1_ = 0;
  o_b1_ = o_w1_ + size_t(n_hidden_) * n_C_;
  o_w2_ = o_b1_ + n_hidden_;
  o_b2_ = o_w2_ + (cfg.n_layers == 2 ? size_t(n_hidden_) * n_hidden_ : 0);
  o_wo_ = o_b2_ + (cfg.n_layers == 2 ? n_hidden_ : 0);
  o_bo_ = o_wo_ + size_t(n_out_) * n_hidden_;
  p_.assign(o_bo_ + n_out_, 0.0);
}

void Mlp64::load(const ModelParams& m) {
  if (m.n_C != n_C_ || m.arch != cfg_.arch || m.n_layers != cfg_.n_layers)
    fail(Err::Internal, "loading mismatched model shape");
  auto put = [&](size_t off, const std::vector<float>& v) {
    for (size_t i = 0; i < v.size(); i++) p_[off + i] = v[i];
  };
  put(o_w1_, m.w1);
  put(o_b1_, m.b1);
  put(o_w2_, m.w2);
  put(o_b2_, m.b2);
  put(o_wo_, m.wo);
  put(o_bo_, m.bo);
}

ModelParams Mlp64::snapshot() const {
  ModelParams m = zero_shape(n_C_, cfg_);
  auto take = [&](size_t off, std::vector<float>& v) {
    for (size_t i = 0; i < v.size(); i++) v[i] = float(p_[off + i]);
  };
  take(o_w1_, m.w1);
  take(o_b1_, m.b1);
  take(o_w2_, m.w2);
  take(o_b2_, m.b2);
  take(o_wo_, m.wo);
  take(o_bo_, m.bo);
  return m;
}

double Mlp64::loss(std::span<const ContextBits> ctx,
                   std::span<const ContextCounts> counts) const {
  if (ctx.size() != counts.size()) fail(Err::LengthMismatch, "batch shape");
  double bits = 0.0;
  for (size_t i = 0; i < ctx.size(); i++) {
    const double p_raw = forward_one(p_, ctx[i]);
    const double p = std::min(std::max(p_raw, kLossFloor), 1.0 - kLossFloor);
    bits -= (double(counts[i].no0) * std::log2(1.0 - p) +
             double(counts[i].no1) * std::log2(p));
  }
  return bits;
}

double Mlp64::forward_one(std::span<const double> p, const ContextBits& c) const {
  if (int(c.len) != n_C_) fail(Err::LengthMismatch, "context length");
  int idx[kMaxInputs];
  const int nset = set_bits(c, idx);
  const int H = n_hidden_;
  double r[kMaxHidden];
  for (int h = 0; h < H; h++) {
    double a = p[o_b1_ + h];
    const double* row = p.data() + o_w1_ + size_t(h) * n_C_;
    for (int s = 0; s < nset; s++) a += row[idx[s]];
    r[h] = a > 0.0 ? a : 0.0;
  }
  if (cfg_.n_layers == 2) {
    double r2[kMaxHidden];
    for (int g = 0; g < H; g++) {
      double a = p[o_b2_ + g];
      const double* row = p.data() + o_w2_ + size_t(g) * H;
      for (int h = 0; h < H; h++) a += row[h] * r[h];
      r2[g] = a > 0.0 ? a : 0.0;
    }
    std::copy(r2, r2 + H, r);
  }
  double alpha[2] = {0.0, 0.0};
  for (int o = 0; o < n_out_; o++) {
    double a = p[o_bo_ + o];
    const double* row = p.data() + o_wo_ + size_t(o) * H;
    for (int h = 0; h < H; h++) a += row[h] * r[h];
    alpha[o] = a;
  }
  const double u = (cfg_.arch == Arch::softmax2) ? alpha[0] - alpha[1] : alpha[0];
  return 1.0 / (1.0 + std::exp(-u));
}

double Mlp64::loss_grad(std::span<const ContextBits> ctx,
                        std::span<const ContextCounts> counts,
                        std::span<double> grad) const {
  if (ctx.size() != counts.size() || grad.size() != p_.size())
    fail(Err::LengthMismatch, "batch or gradient shape");
  const int H = n_hidden_;
  const std::span<const double> p = p_;
  double bits = 0.0;
  int idx[kMaxInputs];
  double a1[kMaxHidden], r1[kMaxHidden], a2[kMaxHidden], r2[kMaxHidden];
  double dr[kMaxHidden], da[kMaxHidden];

  for (size_t i = 0; i < ctx.size(); i++) {
    const int nset = set_bits(ctx[i], idx);
    for (int h = 0; h < H; h++) {
      double a = p[o_b1_ + h];
      const double* row = p.data() + o_w1_ + size_t(h) * n_C_;
      for (int s = 0; s < nset; s++) a += row[idx[s]];
      a1[h] = a;
      r1[h] = a > 0.0 ? a : 0.0;
    }
    const double* rr = r1;
    if (cfg_.n_layers == 2) {
      for (int g = 0; g < H; g++) {
        double a = p[o_b2_ + g];
        const double* row = p.data() + o_w2_ + size_t(g) * H;
        for (int h = 0; h < H; h++) a += row[h] * r1[h];
        a2[g] = a;
        r2[g] = a > 0.0 ? a : 0.0;
      }
      rr = r2;
    }
    double alpha[2] = {0.0, 0.0};
    for (int o = 0; o < n_out_; o++) {
      double a = p[o_bo_ + o];
      const double* row = p.data() + o_wo_ + size_t(o) * H;
      for (int h = 0; h < H; h++) a += row[h] * rr[h];
      alpha[o] = a;
    }
    const double u = (cfg_.arch == Arch::softmax2) ? alpha[0] - alpha[1] : alpha[0];
    const double p_raw = 1.0 / (1.0 + std::exp(-u));
    const double pc = std::min(std::max(p_raw, kLossFloor), 1.0 - kLossFloor);
    const double no0 = double(counts[i].no0), no1 = double(counts[i].no1);
    bits -= (no0 * std::log2(1.0 - pc) + no1 * std::log2(pc));

    // dL/du in bits; zero where the loss clamp flattens the curve, so the
    // gradient is the exact derivative of the clamped loss the
    // finite-difference harness probes.
    const double du =
        (p_raw < kLossFloor || p_raw > 1.0 - kLossFloor) ? 0.0 : ((no0 + no1) * pc - no1) / kLn2;
    double dalpha[2] = {du, -du};
    if (cfg_.arch == Arch::sigmoid1) dalpha[1] = 0.0;

    for (int h = 0; h < H; h++) dr[h] = 0.0;
    for (int o = 0; o < n_out_; o++) {
      const double* row = p.data() + o_wo_ + size_t(o) * H;
      double* grow = grad.data() + o_wo_ + size_t(o) * H;
      for (int h = 0; h < H; h++) {
        grow[h] += dalpha[o] * rr[h];
        dr[h] += row[h] * dalpha[o];
      }
      grad[o_bo_ + o] += dalpha[o];
    }
    if (cfg_.n_layers == 2) {
      for (int g = 0; g < H; g++) da[g] = a2[g] > 0.0 ? dr[g] : 0.0;
      for (int h = 0; h < H; h++) dr[h] = 0.0;
      for (int g = 0; g < H; g++) {
        const double* row = p.data() + o_w2_ + size_t(g) * H;
        double* grow = grad.data() + o_w2_ + size_t(g) * H;
        for (int h = 0; h < H; h++) {
          grow[h] += da[g] * r1[h];
          dr[h] += row[h] * da[g];
        }
        grad[o_b2_ + g] += da[g];
      }
    }
    for (int h = 0; h < H; h++) {
      const double d = a1[h] > 0.0 ? dr[h] : 0.0;
      grad[o_b1_ + h] += d;
      double* grow = grad.data() + o_w1_ + size_t(h) * n_C_;
      for (int s = 0; s < nset; s++) grow[idx[s]] += d;
    }
  }
  return bits;
}

namespace {

uint64_t bounded(uint64_t x, uint64_t n) {
  return uint64_t((unsigned __int128)x * n >> 64);
}

double val_bits_per_occ(const ModelParams& m, std::span<const ContextBits> ctx,
                        std::span<const ContextCounts> counts, uint64_t occ) {
  const std::vector<float> p = forward(m, ctx);
  return loss_bits(p, counts) / double(occ);
}

}  // namespace

ModelParams train(const ContextHistogram& hist, const ContextHistogram& val,
                  ModelConfig cfg, const TrainConfig& tc, std::vector<EpochStats>* log) {
  if (hist.entries.empty()) fail(Err::EmptyHistogram, "training histogram is empty");
  const int n_C = context_length(hist.variant);

  std::vector<ContextBits> tctx;
  std::vector<ContextCounts> tcnt;
  for (const auto& [c, e] : hist.sorted_entries()) {
    tctx.push_back(c);
    tcnt.push_back(e);
  }
  // An absent validation set falls back to the training contexts, which
  // turns early stopping into plain convergence detection.
  std::vector<ContextBits> vctx;
  std::vector<ContextCounts> vcnt;
  for (const auto& [c, e] : (val.entries.empty() ? hist : val).sorted_entries()) {
    vctx.push_back(c);
    vcnt.push_back(e);
  }
  uint64_t tocc = 0, vocc = 0;
  for (const auto& e : tcnt) tocc += e.no0 + e.no1;
  for (const auto& e : vcnt) vocc += e.no0 + e.no1;

  Mlp64 net(n_C, cfg);
  net.load(init_model(n_C, cfg, tc.seed));
  const size_t np = net.param_count();
  std::vector<double> grad(np), mom(np, 0.0), vel(np, 0.0);

  ModelParams best = net.snapshot();
  double best_val = val_bits_per_occ(best, vctx, vcnt, vocc);
  if (log)
    log->push_back({0, val_bits_per_occ(best, tctx, tcnt, tocc), best_val, true});

  std::mt19937_64 rng(tc.seed ^ 0x9E3779B97F4A7C15ull);
  std::vector<size_t> order(tctx.size());
  for (size_t i = 0; i < order.size(); i++) order[i] = i;

  std::vector<ContextBits> bctx;
  std::vector<ContextCounts> bcnt;
  uint64_t t = 0;
  int stale = 0;
  for (int epoch = 1; epoch <= tc.max_epochs; epoch++) {
    for (size_t i = order.size(); i > 1; i--)
      std::swap(order[i - 1], order[bounded(rng(), i)]);

    double epoch_bits = 0.0;
    for (size_t start = 0; start < order.size(); start += tc.batch_size) {
      const size_t end = std::min(start + tc.batch_size, order.size());
      bctx.clear();
      bcnt.clear();
      for (size_t i = start; i < end; i++) {
        bctx.push_back(tctx[order[i]]);
        bcnt.push_back(tcnt[order[i]]);
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      epoch_bits += net.loss_grad(bctx, bcnt, grad);

      t++;
      const double c1 = 1.0 - std::pow(tc.beta1, double(t));
      const double c2 = 1.0 - std::pow(tc.beta2, double(t));
      std::span<double> p = net.params();
      for (size_t j = 0; j < np; j++) {
        mom[j] = tc.beta1 * mom[j] + (1.0 - tc.beta1) * grad[j];
        vel[j] = tc.beta2 * vel[j] + (1.0 - tc.beta2) * grad[j] * grad[j];
        p[j] -= tc.lr * (mom[j] / c1) / (std::sqrt(vel[j] / c2) + tc.eps);
      }
    }
    for (double x : net.params())
      if (!std::isfinite(x)) fail(Err::Internal, "non-finite parameter after epoch " +
                                                     std::to_string(epoch));

    const ModelParams snap = net.snapshot();
    const double v = val_bits_per_occ(snap, vctx, vcnt, vocc);
    const bool improved = v < best_val;
    if (improved) {
      best_val = v;
      best = snap;
      stale = 0;
    } else {
      stale++;
    }
    if (log) log->push_back({epoch, epoch_bits / double(tocc), v, improved});
    if (stale >= tc.patience) break;
  }
  return best;
}

std::vector<uint8_t> save_model(const ModelParams& m) {
  ByteWriter w;
  w.put_bytes("NNOCMDL1", 8);
  w.put_u8(uint8_t(m.arch));
  w.put_u16(uint16_t(m.n_C));
  w.put_u8(uint8_t(m.n_layers + 1));  // weight matrices, output included
  w.put_u16(uint16_t(m.n_hidden));
  if (m.n_layers == 2) w.put_u16(uint16_t(m.n_hidden));
  w.put_u16(uint16_t(m.n_out));
  auto layer = [&](const std::vector<float>& wt, const std::vector<float>& b) {
    for (float x : wt) w.put_f32(x);
    for (float x : b) w.put_f32(x);
  };
  layer(m.w1, m.b1);
  if (m.n_layers == 2) layer(m.w2, m.b2);
  layer(m.wo, m.bo);
  w.put_u64(fnv1a64(w.bytes().data(), w.size()));
  return w.take();
}

uint64_t model_hash(const ModelParams& m) {
  const std::vector<uint8_t> bytes = save_model(m);
  return fnv1a64(bytes.data(), bytes.size() - 8);
}

ModelParams load_model(std::span<const uint8_t> bytes) {
  ByteReader r(bytes, Err::CorruptModelFile);
  const auto magic = r.get_bytes(8);
  if (!std::equal(magic.begin(), magic.begin() + 7, "NNOCMDL"))
    fail(Err::CorruptModelFile, "bad magic");
  if (magic[7] != '1') fail(Err::VersionMismatch, "model format version");
  const uint8_t arch = r.get_u8();
  if (arch > uint8_t(Arch::sigmoid1))
    fail(Err::CorruptModelFile, "arch byte " + std::to_string(arch));
  const int n_C = r.get_u16();
  const uint8_t layers = r.get_u8();
  if (layers != 2 && layers != 3)
    fail(Err::CorruptModelFile, "layer count " + std::to_string(layers));
  std::vector<int> dims;
  for (int i = 0; i < layers; i++) dims.push_back(r.get_u16());

  ModelConfig cfg{Arch(arch), layers - 1};
  const int n_out = (cfg.arch == Arch::softmax2) ? 2 : 1;
  for (int i = 0; i + 1 < layers; i++)
    if (dims[i] != 2 * n_C) fail(Err::CorruptModelFile, "hidden width is not 2*n_C");
  if (dims.back() != n_out) fail(Err::CorruptModelFile, "output width vs arch");
  if (n_C != 100 && n_C != 75 && n_C != 50 && n_C != 36)
    fail(Err::CorruptModelFile, "context length " + std::to_string(n_C));

  ModelParams m = uniform_model(n_C, cfg);
  auto layer = [&](std::vector<float>& wt, std::vector<float>& b) {
    for (float& x : wt) x = r.get_f32();
    for (float& x : b) x = r.get_f32();
  };
  layer(m.w1, m.b1);
  if (m.n_layers == 2) layer(m.w2, m.b2);
  layer(m.wo, m.bo);
  if (r.remaining() != 8) fail(Err::CorruptModelFile, "trailing bytes before the hash");
  const uint64_t want = fnv1a64(bytes.data(), bytes.size() - 8);
  if (r.get_u64() != want) fail(Err::HashMismatch, "model content hash");
  return m;
}

}  // namespace nnoc
