#pragma once

// The occupancy-probability perceptron: 32-bit inference for the coding
// path (fixed accumulation order — encoder and decoder must agree bit for
// bit), 64-bit training with ADAM and validation early stopping,
// probability quantization, and weight serialization.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nnoc/context.hpp"
#include "nnoc/entropy.hpp"
#include "nnoc/error.hpp"

namespace nnoc {

enum class Arch : uint8_t {
  softmax2 = 0,  // two output neurons, p1 = softmax
  sigmoid1 = 1,  // one output neuron, p1 = logistic
};

struct ModelConfig {
  Arch arch = Arch::softmax2;
  int n_layers = 1;  // hidden layers, each 2*n_C wide
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

ModelConfig variant_model_config(Variant v);

struct ModelParams {
  Arch arch = Arch::softmax2;
  int n_layers = 1;
  int n_C = 0;
  int n_hidden = 0;  // 2 * n_C
  int n_out = 2;     // 2 for softmax2, 1 for sigmoid1

  // Row-major: w1[h * n_C + i]; w2[g * n_hidden + h]; wo[o * n_hidden + h].
  std::vector<float> w1, b1;
  std::vector<float> w2, b2;  // empty when n_layers == 1
  std::vector<float> wo, bo;

  size_t param_count() const;
};

// Scaled-uniform init (Glorot bounds), biases zero, deterministic per
// seed. Accepts only the context lengths the templates produce.
ModelParams init_model(int n_C, ModelConfig cfg, uint64_t seed);

// All-zero weights: p1 is exactly 0.5 for every context.
ModelParams uniform_model(int n_C, ModelConfig cfg);

// 32-bit coding-path inference. Hidden pre-activations accumulate the
// weights of set context bits in ascending bit order; the result is
// clamped to [2^-24, 1 - 2^-24].
float forward_one(const ModelParams& m, const ContextBits& c);
std::vector<float> forward(const ModelParams& m, std::span<const ContextBits> batch);

// Occurrence-weighted codelength in bits: -sum(no0*log2(p0) + no1*log2(p1)).
// Probabilities outside (0,1) are an error; inside, they are clamped to
// [1e-7, 1 - 1e-7] before the log so training losses stay finite.
double loss_bits(std::span<const float> p1, std::span<const ContextCounts> counts);

QuantizedDist quantize(float p1);

// 64-bit training/reference model over one flat parameter vector. The
// coding path never touches this class; tests use it as the
// finite-difference harness, training uses it as the master copy that is
// cast to 32-bit for checkpoints.
class Mlp64 {
 public:
  Mlp64(int n_C, ModelConfig cfg);

  size_t param_count() const { return p_.size(); }
  std::span<double> params() { return p_; }
  std::span<const double> params() const { return p_; }

  double loss(std::span<const ContextBits> ctx, std::span<const ContextCounts> counts) const;
  // Adds the analytic gradient (same clamp semantics as loss) into grad.
  double loss_grad(std::span<const ContextBits> ctx, std::span<const ContextCounts> counts,
                   std::span<double> grad) const;

  void load(const ModelParams& m);
  ModelParams snapshot() const;  // cast to 32-bit

  int n_C() const { return n_C_; }
  ModelConfig config() const { return cfg_; }

 private:
  double forward_one(std::span<const double> p, const ContextBits& c) const;

  int n_C_, n_hidden_, n_out_;
  ModelConfig cfg_;
  std::vector<double> p_;
  // Flat layout offsets: [w1 b1 (w2 b2) wo bo].
  size_t o_w1_, o_b1_, o_w2_, o_b2_, o_wo_, o_bo_;
  friend class Mlp64Layout;
};

struct TrainConfig {
  uint64_t seed = 1;
  size_t batch_size = 30000;
  int patience = 5;
  int max_epochs = 200;
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

struct EpochStats {
  int epoch = 0;  // 0 is the untrained init
  double train_bits_per_occ = 0.0;
  double val_bits_per_occ = 0.0;
  bool best = false;
};

// ADAM over shuffled unique-context batches, each weighted by its counts.
// Validation runs the 32-bit coding path on the cast parameters after
// every epoch; the best cast checkpoint (including the init itself) is
// returned, so the returned model never validates worse than epoch 0.
ModelParams train(const ContextHistogram& hist, const ContextHistogram& val,
                  ModelConfig cfg, const TrainConfig& tc,
                  std::vector<EpochStats>* log = nullptr);

std::vector<uint8_t> save_model(const ModelParams& m);
ModelParams load_model(std::span<const uint8_t> bytes);

// FNV-1a of the serialized model minus its hash trailer; also the value
// stored in that trailer and in bitstream headers.
uint64_t model_hash(const ModelParams& m);

}  // namespace nnoc
