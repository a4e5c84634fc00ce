#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "semres/neuralcore.hpp"

namespace semres::denoise {

// Sinusoidal position features for the diffusion step index.
std::vector<double> timestep_embed(int t, int d);

// How the learned per-sample threshold combines with the attention output:
// `shrinkage` soft-thresholds it, sign(a) * max(|a| - tau, 0); `subtract`
// takes the plain difference a - tau.
enum class ThresholdMode { shrinkage, subtract };

std::string threshold_mode_name(ThresholdMode mode);
ThresholdMode threshold_mode_from_name(const std::string& name);

struct SemstConfig {
  int d_in = 0;
  int d_hidden = 128;
  int n_blocks = 2;
  int n_tokens = 8;
  int n_heads = 2;
  ThresholdMode threshold_mode = ThresholdMode::subtract;

  int d_tok() const { return d_hidden / n_tokens; }
  int d_head() const { return d_tok() / n_heads; }
  void validate() const;
};

struct MlpConfig {
  int d_in = 0;
  std::vector<int> hidden = {128, 128};

  void validate() const;
};

// Noise-prediction network interface: given corrupted samples and their step
// indices, predict the noise component. Mutable while training; treat as
// read-only once training finishes.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual nn::Matrix forward(const nn::Matrix& x, std::span<const int> t, bool train) = 0;
  nn::Matrix forward(const nn::Matrix& x, int t, bool train);

  // Backpropagates through the last forward call; accumulates parameter
  // gradients and returns dL/dX.
  virtual nn::Matrix backward(const nn::Matrix& d_out) = 0;

  virtual std::vector<nn::ParamRef> parameters() = 0;
  virtual int width() const = 0;

  void zero_grad();
};

// Linear -> BatchNorm -> ReLU.
class FcBlock {
 public:
  FcBlock(std::size_t d_in, std::size_t d_out, Rng& rng);
  nn::Matrix forward(const nn::Matrix& x, bool train);
  nn::Matrix backward(const nn::Matrix& dy);
  void collect_params(const std::string& prefix, std::vector<nn::ParamRef>& out);

 private:
  nn::LinearLayer linear_;
  nn::BatchNormLayer bn_;
  nn::Matrix pre_relu_;
};

// Multi-head self-attention over tokens obtained by reshaping each sample's
// hidden vector into n_tokens slices of width d_tok. Heads project tokens
// with bias-free W^Q/W^K/W^V, attend with softmax(QK^T/sqrt(d_head))V, are
// concatenated, and pass through a shared per-token output projection.
class MhsaLayer {
 public:
  MhsaLayer(const SemstConfig& cfg, Rng& rng);
  nn::Matrix forward(const nn::Matrix& x);
  nn::Matrix backward(const nn::Matrix& dy);
  void collect_params(const std::string& prefix, std::vector<nn::ParamRef>& out);

 private:
  int d_hidden_, n_tokens_, d_tok_, n_heads_, d_head_;
  std::vector<nn::Matrix> wq_, wk_, wv_;  // d_tok x d_head per head
  std::vector<nn::Matrix> dwq_, dwk_, dwv_;
  nn::Matrix wo_, dwo_;  // d_tok x d_tok

  nn::Matrix tokens_;                // (n * n_tokens) x d_tok
  std::vector<nn::Matrix> q_, k_, v_;
  std::vector<nn::Matrix> attn_;     // (n * n_tokens) x n_tokens
  nn::Matrix concat_;
};

// Linear -> BatchNorm -> Sigmoid; per-sample learned threshold values.
class SoftThresholdBranch {
 public:
  SoftThresholdBranch(std::size_t d, Rng& rng);
  nn::Matrix forward(const nn::Matrix& x, bool train);
  nn::Matrix backward(const nn::Matrix& dy);
  void collect_params(const std::string& prefix, std::vector<nn::ParamRef>& out);

 private:
  nn::LinearLayer linear_;
  nn::BatchNormLayer bn_;
  nn::Matrix post_sigmoid_;
};

// Residual unit: x plus the thresholded attention response of the shared
// feature extraction of x. The skip path is the identity.
class SemstBlock {
 public:
  SemstBlock(const SemstConfig& cfg, Rng& rng);
  nn::Matrix forward(const nn::Matrix& x, bool train);
  nn::Matrix backward(const nn::Matrix& dy);
  // The indirect mapping alone, for residual wiring checks.
  nn::Matrix indirect(const nn::Matrix& x, bool train);
  void collect_params(const std::string& prefix, std::vector<nn::ParamRef>& out);

 private:
  ThresholdMode mode_;
  FcBlock fc_;
  MhsaLayer attn_;
  SoftThresholdBranch threshold_;
  nn::Matrix attn_out_;   // shrinkage backward caches
  nn::Matrix tau_;
};

class SemstResNet final : public Denoiser {
 public:
  SemstResNet(const SemstConfig& cfg, std::uint64_t init_seed);

  nn::Matrix forward(const nn::Matrix& x, std::span<const int> t, bool train) override;
  using Denoiser::forward;
  nn::Matrix backward(const nn::Matrix& d_out) override;
  std::vector<nn::ParamRef> parameters() override;
  int width() const override { return cfg_.d_in; }
  const SemstConfig& config() const { return cfg_; }
  SemstBlock& block(std::size_t i) { return *blocks_[i]; }

 private:
  SemstConfig cfg_;
  std::unique_ptr<FcBlock> fc_in_;
  std::vector<std::unique_ptr<SemstBlock>> blocks_;
  std::unique_ptr<nn::LinearLayer> out_;
};

class MlpDenoiser final : public Denoiser {
 public:
  MlpDenoiser(const MlpConfig& cfg, std::uint64_t init_seed);

  nn::Matrix forward(const nn::Matrix& x, std::span<const int> t, bool train) override;
  using Denoiser::forward;
  nn::Matrix backward(const nn::Matrix& d_out) override;
  std::vector<nn::ParamRef> parameters() override;
  int width() const override { return cfg_.d_in; }
  const MlpConfig& config() const { return cfg_; }

 private:
  MlpConfig cfg_;
  std::vector<std::unique_ptr<nn::LinearLayer>> layers_;  // hidden... + output
  std::vector<nn::Matrix> pre_relu_;
};

}  // namespace semres::denoise
