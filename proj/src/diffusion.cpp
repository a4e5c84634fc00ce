#include "semres/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace semres::diffusion {

NoiseSchedule linear_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw std::invalid_argument("linear_schedule: T must be at least 1");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
    throw std::invalid_argument("linear_schedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.T = T;
  s.beta.resize(T);
  s.alpha.resize(T);
  s.alpha_bar.resize(T);
  s.beta_tilde.resize(T);
  double abar_prev = 1.0;
  for (int i = 0; i < T; ++i) {
    s.beta[i] = T == 1 ? beta_start
                       : beta_start + (beta_end - beta_start) * static_cast<double>(i) /
                             static_cast<double>(T - 1);
    s.alpha[i] = 1.0 - s.beta[i];
    s.alpha_bar[i] = abar_prev * s.alpha[i];
    s.beta_tilde[i] = s.beta[i] * (1.0 - abar_prev) / (1.0 - s.alpha_bar[i]);
    abar_prev = s.alpha_bar[i];
  }
  return s;
}

namespace {

void check_t(int t, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.T)
    throw std::invalid_argument("timestep " + std::to_string(t) + " outside [1, " +
                                std::to_string(sched.T) + "]");
}

}  // namespace

nn::Matrix q_sample(const nn::Matrix& s0, int t, const nn::Matrix& eps, const NoiseSchedule& sched) {
  std::vector<int> ts(s0.rows(), t);
  return q_sample(s0, ts, eps, sched);
}

nn::Matrix q_sample(const nn::Matrix& s0, std::span<const int> t, const nn::Matrix& eps,
                    const NoiseSchedule& sched) {
  if (!s0.same_shape(eps)) throw std::invalid_argument("q_sample: shape mismatch");
  if (t.size() != s0.rows()) throw std::invalid_argument("q_sample: one timestep per row required");
  nn::ensure_finite(s0, "q_sample input");
  nn::Matrix out(s0.rows(), s0.cols());
  for (std::size_t i = 0; i < s0.rows(); ++i) {
    check_t(t[i], sched);
    const double abar = sched.alpha_bar_at(t[i]);
    const double signal = std::sqrt(abar);
    const double noise = std::sqrt(1.0 - abar);
    for (std::size_t j = 0; j < s0.cols(); ++j)
      out(i, j) = signal * s0(i, j) + noise * eps(i, j);
  }
  return out;
}

double noise_mse(const nn::Matrix& eps, const nn::Matrix& predicted, nn::Matrix* d_pred) {
  if (!eps.same_shape(predicted)) throw std::invalid_argument("noise_mse: shape mismatch");
  const double scale = 1.0 / static_cast<double>(eps.size());
  double loss = 0.0;
  if (d_pred) *d_pred = nn::Matrix(eps.rows(), eps.cols());
  for (std::size_t i = 0; i < eps.rows(); ++i)
    for (std::size_t j = 0; j < eps.cols(); ++j) {
      const double diff = predicted(i, j) - eps(i, j);
      loss += diff * diff * scale;
      if (d_pred) (*d_pred)(i, j) = 2.0 * diff * scale;
    }
  if (!std::isfinite(loss)) throw std::runtime_error("noise_mse: loss is not finite");
  return loss;
}

double simple_loss(denoise::Denoiser& den, const nn::Matrix& s0, std::span<const int> t,
                   const nn::Matrix& eps, const NoiseSchedule& sched, bool train) {
  const nn::Matrix s_t = q_sample(s0, t, eps, sched);
  const nn::Matrix predicted = den.forward(s_t, t, train);
  return noise_mse(eps, predicted);
}

nn::Matrix p_sample_step(denoise::Denoiser& den, const nn::Matrix& s_t, int t,
                         const NoiseSchedule& sched, Rng& rng) {
  check_t(t, sched);
  const nn::Matrix z = den.forward(s_t, t, /*train=*/false);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(sched.alpha_at(t));
  const double noise_coef = sched.beta_at(t) / std::sqrt(1.0 - sched.alpha_bar_at(t));
  nn::Matrix out(s_t.rows(), s_t.cols());
  for (std::size_t i = 0; i < s_t.rows(); ++i)
    for (std::size_t j = 0; j < s_t.cols(); ++j)
      out(i, j) = inv_sqrt_alpha * (s_t(i, j) - noise_coef * z(i, j));
  if (t > 1) {
    const double sigma = std::sqrt(sched.beta_tilde_at(t));
    for (std::size_t i = 0; i < out.rows(); ++i)
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += sigma * rng.gaussian();
  }
  return out;
}

nn::Matrix gaussian_matrix(std::size_t n, std::size_t d, Rng& rng) {
  nn::Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = rng.gaussian();
  return m;
}

nn::Matrix denoise_from(denoise::Denoiser& den, const nn::Matrix& s_t, int t_start,
                        const NoiseSchedule& sched, Rng& rng) {
  check_t(t_start, sched);
  nn::Matrix s = s_t;
  for (int t = t_start; t >= 1; --t) {
    s = p_sample_step(den, s, t, sched, rng);
    if (!s.all_finite())
      throw std::runtime_error("sampling diverged at step " + std::to_string(t));
  }
  return s;
}

nn::Matrix sample(denoise::Denoiser& den, std::size_t n, std::size_t d, const NoiseSchedule& sched,
                  Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample: need at least one row");
  return denoise_from(den, gaussian_matrix(n, d, rng), sched.T, sched, rng);
}

}  // namespace semres::diffusion
