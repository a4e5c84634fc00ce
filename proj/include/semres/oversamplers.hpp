#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semres/dataio.hpp"
#include "semres/trainer.hpp"

namespace semres::oversample {

// Supported balancing methods. "none" passes the split through unchanged.
const std::vector<std::string>& method_names();
bool is_ddpm_method(const std::string& method);

struct OversampleRequest {
  const dataio::Dataset* data = nullptr;
  std::vector<std::size_t> train_idx;  // rows of the training split
  std::string method = "none";
  std::uint64_t seed = 0;
  int smote_k = 5;
  int adasyn_k = 5;
  trainer::TrainConfig diffusion;  // used by the ddpm methods
};

// A balanced training split in both representations: raw rows (synthetic
// ones decoded back through the schema) and the encoded matrix classifiers
// consume. Original rows come first, synthetic minority rows after.
struct BalancedTrainSet {
  dataio::Normalizer normalizer;  // fitted on the minority training rows
  nn::Matrix x;
  std::vector<std::uint8_t> y;
  std::vector<std::uint8_t> synthetic;
  std::vector<dataio::Row> rows;
  std::size_t n_original = 0;
  std::vector<std::string> warnings;
};

// Construction record for synthetic SMOTE rows, for verification.
struct SmoteProvenance {
  std::vector<std::size_t> base;
  std::vector<std::size_t> neighbor;
  std::vector<double> lambda;
};

// Classic interpolation oversampling: pick a minority row, pick one of its k
// nearest minority neighbors, emit x + lambda * (x_nn - x) with uniform
// lambda. k is capped at n - 1.
nn::Matrix smote(const nn::Matrix& minority, int k, std::size_t count, std::uint64_t seed,
                 SmoteProvenance* provenance = nullptr);

// Boundary-weighted interpolation: synthetic counts are allocated per
// minority row proportionally to the majority share of its k nearest
// neighbors in the full training set (largest-remainder rounding), then
// interpolated between minority neighbors as in smote. Falls back to uniform
// allocation when no minority row has majority neighbors. `allocations`,
// when given, receives the per-minority-row synthetic counts.
nn::Matrix adasyn(const nn::Matrix& train_x, const std::vector<std::uint8_t>& train_y, int k,
                  std::size_t count, std::uint64_t seed, bool* uniform_fallback = nullptr,
                  std::vector<std::size_t>* allocations = nullptr);

// Dispatches on request.method and fills the split up to majority size.
BalancedTrainSet balance(const OversampleRequest& request);

// Diffusion-based oversampling (request.method selects the semst or mlp
// denoiser): fit-encode the minority rows, train, sample the deficit, clamp
// to [0,1], decode.
BalancedTrainSet semres_oversample(const OversampleRequest& request);

}  // namespace semres::oversample
