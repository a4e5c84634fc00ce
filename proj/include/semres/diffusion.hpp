#pragma once

#include <span>
#include <vector>

#include "semres/denoisers.hpp"
#include "semres/matrix.hpp"
#include "semres/rng.hpp"

namespace semres::diffusion {

// Forward-process schedule. Entry t-1 of each vector holds the step-t value;
// alpha_bar is the running product of alphas with alpha_bar_0 defined as 1,
// and beta_tilde the posterior variances (beta_tilde_1 = 0).
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> beta_tilde;

  double beta_at(int t) const { return beta.at(static_cast<std::size_t>(t - 1)); }
  double alpha_at(int t) const { return alpha.at(static_cast<std::size_t>(t - 1)); }
  double alpha_bar_at(int t) const { return alpha_bar.at(static_cast<std::size_t>(t - 1)); }
  double beta_tilde_at(int t) const { return beta_tilde.at(static_cast<std::size_t>(t - 1)); }
};

NoiseSchedule linear_schedule(int T, double beta_start = 1e-4, double beta_end = 0.02);

// Closed-form forward corruption: sqrt(abar_t) * s0 + sqrt(1 - abar_t) * eps.
nn::Matrix q_sample(const nn::Matrix& s0, int t, const nn::Matrix& eps, const NoiseSchedule& sched);
nn::Matrix q_sample(const nn::Matrix& s0, std::span<const int> t, const nn::Matrix& eps,
                    const NoiseSchedule& sched);

// Mean squared noise-prediction error; optionally emits dL/dprediction for
// the optimizer. Throws when the loss is not finite.
double noise_mse(const nn::Matrix& eps, const nn::Matrix& predicted, nn::Matrix* d_pred = nullptr);

// The training objective: corrupt s0 with (t, eps), predict the noise, take
// the mean squared error over every batch entry and coordinate.
double simple_loss(denoise::Denoiser& den, const nn::Matrix& s0, std::span<const int> t,
                   const nn::Matrix& eps, const NoiseSchedule& sched, bool train = false);

// One reverse transition. Deterministic at t = 1 where the posterior
// variance vanishes; otherwise adds sqrt(beta_tilde_t) * xi, xi ~ N(0, I).
nn::Matrix p_sample_step(denoise::Denoiser& den, const nn::Matrix& s_t, int t,
                         const NoiseSchedule& sched, Rng& rng);

// Full ancestral chain from pure noise down to t = 1.
nn::Matrix sample(denoise::Denoiser& den, std::size_t n, std::size_t d, const NoiseSchedule& sched,
                  Rng& rng);

// Reverse chain started from a given corrupted state at step t_start.
nn::Matrix denoise_from(denoise::Denoiser& den, const nn::Matrix& s_t, int t_start,
                        const NoiseSchedule& sched, Rng& rng);

// Fills a matrix with standard normal draws in row-major order.
nn::Matrix gaussian_matrix(std::size_t n, std::size_t d, Rng& rng);

}  // namespace semres::diffusion
