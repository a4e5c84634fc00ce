#include <doctest.h>

#include <cmath>

#include "semres/diffusion.hpp"
#include "test_support.hpp"

using namespace semres;

namespace {

// Echoes back a fixed matrix regardless of the input: stands in for an
// oracle noise predictor.
class FixedDenoiser final : public denoise::Denoiser {
 public:
  explicit FixedDenoiser(nn::Matrix out) : out_(std::move(out)) {}
  nn::Matrix forward(const nn::Matrix&, std::span<const int>, bool) override { return out_; }
  using Denoiser::forward;
  nn::Matrix backward(const nn::Matrix& d) override { return d; }
  std::vector<nn::ParamRef> parameters() override { return {}; }
  int width() const override { return static_cast<int>(out_.cols()); }

 private:
  nn::Matrix out_;
};

}  // namespace

TEST_CASE("linear schedule") {
  const diffusion::NoiseSchedule one = diffusion::linear_schedule(1, 0.5, 0.5);
  CHECK(one.alpha_bar_at(1) == doctest::Approx(0.5));
  CHECK(one.beta_tilde_at(1) == 0.0);

  const diffusion::NoiseSchedule full = diffusion::linear_schedule(1000);
  CHECK(full.alpha_bar_at(1000) < 1e-4);
  CHECK(full.beta_at(1) == doctest::Approx(1e-4));
  CHECK(full.beta_at(1000) == doctest::Approx(0.02));
  for (int t = 2; t <= 1000; ++t) CHECK(full.alpha_bar_at(t) < full.alpha_bar_at(t - 1));
  CHECK(full.beta_tilde_at(1) == 0.0);
  for (int t = 2; t <= 1000; ++t) CHECK(full.beta_tilde_at(t) > 0.0);

  CHECK_THROWS_AS(diffusion::linear_schedule(0), std::invalid_argument);
  CHECK_THROWS_AS(diffusion::linear_schedule(10, 0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(diffusion::linear_schedule(10, 0.2, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(diffusion::linear_schedule(10, 0.5, 1.0), std::invalid_argument);
}

TEST_CASE("q_sample closed form") {
  // T=1 with beta 0.75 pins alpha_bar at exactly 0.25.
  const diffusion::NoiseSchedule sched = diffusion::linear_schedule(1, 0.75, 0.75);
  const nn::Matrix s0{{1.0}};

  const nn::Matrix zero{{0.0}};
  CHECK(diffusion::q_sample(s0, 1, zero, sched)(0, 0) == doctest::Approx(0.5).epsilon(1e-12));

  const nn::Matrix eps{{2.0}};
  CHECK(diffusion::q_sample(s0, 1, eps, sched)(0, 0) ==
        doctest::Approx(0.5 + 2.0 * std::sqrt(0.75)).epsilon(1e-12));

  CHECK_THROWS_AS(diffusion::q_sample(s0, 2, eps, sched), std::invalid_argument);
  CHECK_THROWS_AS(diffusion::q_sample(s0, 0, eps, sched), std::invalid_argument);
}

TEST_CASE("q_sample marginal moments match the closed form") {
  const diffusion::NoiseSchedule sched = diffusion::linear_schedule(100, 1e-3, 0.2);
  const int t = 37;
  const double abar = sched.alpha_bar_at(t);
  const double s0_value = 0.7;
  const nn::Matrix s0(1, 1, s0_value);

  Rng rng(4242);
  const std::size_t n = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    nn::Matrix eps(1, 1, rng.gaussian());
    const double v = diffusion::q_sample(s0, t, eps, sched)(0, 0);
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / double(n);
  const double var = sum_sq / double(n) - mean * mean;
  const double sigma = std::sqrt(1.0 - abar);
  CHECK(std::abs(mean - std::sqrt(abar) * s0_value) < 4.0 * sigma / 100.0);
  CHECK(std::abs(var - (1.0 - abar)) < 0.05 * (1.0 - abar));
}

TEST_CASE("simple loss") {
  const diffusion::NoiseSchedule sched = diffusion::linear_schedule(10, 0.01, 0.1);
  Rng rng(7);
  const nn::Matrix s0 = oracle::random_matrix(4, 3, rng, 0.2);
  const nn::Matrix eps = oracle::random_matrix(4, 3, rng);
  const std::vector<int> t = {1, 4, 7, 10};

  FixedDenoiser oracle_denoiser(eps);
  CHECK(diffusion::simple_loss(oracle_denoiser, s0, t, eps, sched) == doctest::Approx(0.0));

  nn::Matrix signs(4, 3);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) signs(i, j) = (i + j) % 2 ? 1.0 : -1.0;
  FixedDenoiser zeros(nn::Matrix(4, 3, 0.0));
  CHECK(diffusion::simple_loss(zeros, s0, t, signs, sched) == doctest::Approx(1.0));

  // Brute-force elementwise recomputation on a random case.
  const nn::Matrix pred = oracle::random_matrix(4, 3, rng);
  FixedDenoiser fixed(pred);
  double expect = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) expect += (eps(i, j) - pred(i, j)) * (eps(i, j) - pred(i, j));
  expect /= 12.0;
  CHECK(diffusion::simple_loss(fixed, s0, t, eps, sched) == doctest::Approx(expect).epsilon(1e-12));

  // Permutation of batch rows leaves the loss unchanged.
  nn::Matrix s0_perm(4, 3), eps_perm(4, 3), pred_perm(4, 3);
  const std::size_t order[4] = {2, 0, 3, 1};
  std::vector<int> t_perm(4);
  for (std::size_t i = 0; i < 4; ++i) {
    t_perm[i] = t[order[i]];
    for (std::size_t j = 0; j < 3; ++j) {
      s0_perm(i, j) = s0(order[i], j);
      eps_perm(i, j) = eps(order[i], j);
      pred_perm(i, j) = pred(order[i], j);
    }
  }
  FixedDenoiser fixed_perm(pred_perm);
  CHECK(diffusion::simple_loss(fixed_perm, s0_perm, t_perm, eps_perm, sched) ==
        doctest::Approx(diffusion::simple_loss(fixed, s0, t, eps, sched)).epsilon(1e-12));
}

TEST_CASE("reverse step inverts the forward step at t=1") {
  const diffusion::NoiseSchedule sched = diffusion::linear_schedule(50, 1e-3, 0.2);
  Rng rng(11);
  const nn::Matrix s0 = oracle::random_matrix(5, 2, rng, 0.3);
  const nn::Matrix eps = oracle::random_matrix(5, 2, rng);
  const nn::Matrix s1 = diffusion::q_sample(s0, 1, eps, sched);

  FixedDenoiser oracle_denoiser(eps);
  Rng sampler(1);
  const nn::Matrix back = diffusion::p_sample_step(oracle_denoiser, s1, 1, sched, sampler);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(back(i, j) - s0(i, j)) < 1e-10);

  // Step 1 is deterministic: independent noise streams agree.
  Rng other(999);
  const nn::Matrix back2 = diffusion::p_sample_step(oracle_denoiser, s1, 1, sched, other);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(back(i, j) == back2(i, j));
}

TEST_CASE("reverse step mean formula, single coordinate") {
  const diffusion::NoiseSchedule sched = diffusion::linear_schedule(10, 0.05, 0.05);
  const int t = 1;  // deterministic step, mean formula only
  const double s_t = 0.8;
  const double z = -0.4;
  FixedDenoiser den(nn::Matrix(1, 1, z));
  Rng rng(3);
  const nn::Matrix out = diffusion::p_sample_step(den, nn::Matrix(1, 1, s_t), t, sched, rng);
  const double alpha = 0.95;
  const double abar = sched.alpha_bar_at(t);
  const double expect = (1.0 / std::sqrt(alpha)) * (s_t - 0.05 / std::sqrt(1.0 - abar) * z);
  CHECK(out(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("ancestral sampling is seeded and shaped") {
  const diffusion::NoiseSchedule sched = diffusion::linear_schedule(20, 1e-3, 0.2);
  FixedDenoiser den(nn::Matrix(6, 3, 0.1));
  Rng a(77), b(77), c(78);
  const nn::Matrix s1 = diffusion::sample(den, 6, 3, sched, a);
  const nn::Matrix s2 = diffusion::sample(den, 6, 3, sched, b);
  const nn::Matrix s3 = diffusion::sample(den, 6, 3, sched, c);
  CHECK(s1.rows() == 6);
  CHECK(s1.cols() == 3);
  bool all_equal = true, any_diff = false;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      all_equal = all_equal && s1(i, j) == s2(i, j);
      any_diff = any_diff || s1(i, j) != s3(i, j);
    }
  CHECK(all_equal);
  CHECK(any_diff);
}
