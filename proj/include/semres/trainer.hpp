#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "semres/dataio.hpp"
#include "semres/denoisers.hpp"
#include "semres/diffusion.hpp"

namespace semres::trainer {

enum class Arch { semst, mlp };

std::string arch_name(Arch a);
Arch arch_from_name(const std::string& name);

struct TrainConfig {
  int iterations = 20000;
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int batch_size = 0;  // 0 selects min(64, n)
  double lr = 1e-3;
  std::uint64_t seed = 0;
  Arch arch = Arch::semst;
  denoise::SemstConfig semst;  // d_in filled from the training matrix
  denoise::MlpConfig mlp;
};

struct ParamShape {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;

  bool operator==(const ParamShape&) const = default;
};

struct Checkpoint {
  Arch arch = Arch::semst;
  denoise::SemstConfig semst;
  denoise::MlpConfig mlp;
  int T = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<ParamShape> manifest;
  std::vector<double> weights;  // concatenated in manifest order
  dataio::Normalizer normalizer;
  std::string schema_fingerprint;
  std::uint64_t seed = 0;
  double final_loss = 0.0;

  int d_in() const { return arch == Arch::semst ? semst.d_in : mlp.d_in; }
  diffusion::NoiseSchedule schedule() const { return diffusion::linear_schedule(T, beta_start, beta_end); }
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> loss_trace;     // raw per-iteration loss
  std::vector<double> smoothed_loss;  // exponential moving average, factor 0.99
  long steps = 0;
};

// Trains the configured denoiser on an encoded minority matrix (entries must
// lie in [0,1]). Each step draws a batch, per-row uniform timesteps and fresh
// Gaussian noise, then takes one Adam step on the noise-prediction error.
// Deterministic given the config seed. Throws on divergence, reporting the
// iteration index.
TrainResult train(const nn::Matrix& minority, const TrainConfig& config,
                  const dataio::Normalizer& normalizer = {},
                  const std::string& schema_fingerprint = "",
                  std::vector<std::string>* warnings = nullptr);

// Rebuilds the denoiser described by a checkpoint with its weights (and any
// running statistics) restored.
std::unique_ptr<denoise::Denoiser> instantiate(const Checkpoint& ckpt);

// Snapshots the current parameters of a live model into checkpoint form.
Checkpoint snapshot(denoise::Denoiser& den, const TrainConfig& config,
                    const dataio::Normalizer& normalizer, const std::string& schema_fingerprint,
                    double final_loss);

// On-disk layout: <dir>/meta.json (format marker, architecture, schedule,
// normalizer, parameter manifest) plus <dir>/weights.bin holding the raw
// little-endian doubles in manifest order. Round-trips bit-exactly.
void save(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load(const std::filesystem::path& dir);

bool checkpoints_equal(const Checkpoint& a, const Checkpoint& b);

}  // namespace semres::trainer
