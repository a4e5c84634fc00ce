#include <doctest.h>

#include <cmath>

#include "semres/denoisers.hpp"
#include "test_support.hpp"

using namespace semres;

namespace {

double sq_loss(const nn::Matrix& y, const nn::Matrix& target) {
  double l = 0.0;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) {
      const double d = y(i, j) - target(i, j);
      l += d * d;
    }
  return l;
}

nn::Matrix sq_loss_grad(const nn::Matrix& y, const nn::Matrix& target) {
  nn::Matrix g(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) g(i, j) = 2.0 * (y(i, j) - target(i, j));
  return g;
}

nn::ParamRef find_param(std::vector<nn::ParamRef>& params, const std::string& name) {
  for (nn::ParamRef& p : params)
    if (p.name == name) return p;
  throw std::logic_error("no parameter named " + name);
}

}  // namespace

TEST_CASE("timestep embedding") {
  for (const int t : {1, 57, 999}) {
    const std::vector<double> e = denoise::timestep_embed(t, 16);
    for (const double v : e) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
  const std::vector<double> zero = denoise::timestep_embed(0, 2);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 1.0);

  const std::vector<double> e1 = denoise::timestep_embed(1, 8);
  const std::vector<double> e2 = denoise::timestep_embed(2, 8);
  double diff = 0.0;
  for (std::size_t i = 0; i < e1.size(); ++i) diff += std::abs(e1[i] - e2[i]);
  CHECK(diff > 0.0);
}

TEST_CASE("config invariants") {
  denoise::SemstConfig bad{.d_in = 4, .d_hidden = 10, .n_blocks = 1, .n_tokens = 4, .n_heads = 1};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);  // 10 % 4 != 0
  denoise::SemstConfig bad_heads{.d_in = 4, .d_hidden = 8, .n_blocks = 1, .n_tokens = 2, .n_heads = 3};
  CHECK_THROWS_AS(bad_heads.validate(), std::invalid_argument);
  denoise::MlpConfig no_hidden{.d_in = 4, .hidden = {}};
  CHECK_THROWS_AS(no_hidden.validate(), std::invalid_argument);
}

TEST_CASE("fc block outputs are nonnegative and reduce to relu in eval") {
  Rng rng(5);
  denoise::FcBlock block(3, 3, rng);
  const nn::Matrix x = oracle::random_matrix(6, 3, rng);
  const nn::Matrix y = block.forward(x, true);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) CHECK(y(i, j) >= 0.0);

  // Identity weights, default BN running stats (0, 1) in eval mode: ReLU(x).
  denoise::FcBlock ident(3, 3, rng);
  std::vector<nn::ParamRef> params;
  ident.collect_params("fc", params);
  nn::Matrix& w = *find_param(params, "fc.linear.w").value;
  w.fill(0.0);
  for (int i = 0; i < 3; ++i) w(i, i) = 1.0;
  find_param(params, "fc.linear.b").value->fill(0.0);
  const nn::Matrix r = ident.forward(x, false);
  const nn::Matrix expect = nn::relu(x);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      CHECK(r(i, j) == doctest::Approx(expect(i, j)).epsilon(1e-4));
}

TEST_CASE("fc block gradient check") {
  Rng rng(15);
  denoise::FcBlock block(8, 8, rng);
  const nn::Matrix x = oracle::random_matrix(4, 8, rng);
  const nn::Matrix target = oracle::random_matrix(4, 8, rng);
  std::vector<nn::ParamRef> params;
  block.collect_params("fc", params);

  const auto loss = [&] { return sq_loss(block.forward(x, false), target); };
  const auto backprop = [&] {
    for (nn::ParamRef& p : params)
      if (p.grad) p.grad->fill(0.0);
    const nn::Matrix y = block.forward(x, false);
    block.backward(sq_loss_grad(y, target));
  };
  CHECK(nn::grad_check(params, loss, backprop) < 1e-4);
}

TEST_CASE("attention over a single token multiplies values through") {
  // n_tokens = 1: softmax over one key is 1, so the output is V W^O.
  denoise::SemstConfig cfg{.d_in = 4, .d_hidden = 4, .n_blocks = 1, .n_tokens = 1, .n_heads = 1};
  cfg.validate();
  Rng rng(33);
  denoise::MhsaLayer attn(cfg, rng);
  std::vector<nn::ParamRef> params;
  attn.collect_params("attn", params);
  oracle::randomize_params(params, ".wo", rng);  // the output head starts at zero
  const nn::Matrix wv = *find_param(params, "attn.wv0").value;
  const nn::Matrix wo = *find_param(params, "attn.wo").value;

  const nn::Matrix x = oracle::random_matrix(5, 4, rng);
  const nn::Matrix y = attn.forward(x);
  const nn::Matrix expect = nn::matmul(nn::matmul(x, wv), wo);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j)
      CHECK(y(i, j) == doctest::Approx(expect(i, j)).epsilon(1e-12));
}

TEST_CASE("attention hand case: two scalar tokens of zero") {
  denoise::SemstConfig cfg{.d_in = 2, .d_hidden = 2, .n_blocks = 1, .n_tokens = 2, .n_heads = 1};
  cfg.validate();
  Rng rng(1);
  denoise::MhsaLayer attn(cfg, rng);
  std::vector<nn::ParamRef> params;
  attn.collect_params("attn", params);
  for (nn::ParamRef& p : params) p.value->fill(1.0);

  const nn::Matrix y = attn.forward(nn::Matrix{{0.0, 0.0}});
  CHECK(y(0, 0) == 0.0);
  CHECK(y(0, 1) == 0.0);

  // Identical tokens attend uniformly: both outputs equal.
  const nn::Matrix same = attn.forward(nn::Matrix{{0.7, 0.7}});
  CHECK(same(0, 0) == doctest::Approx(same(0, 1)).epsilon(1e-12));
}

TEST_CASE("attention rows are independent samples") {
  denoise::SemstConfig cfg{.d_in = 8, .d_hidden = 8, .n_blocks = 1, .n_tokens = 4, .n_heads = 2};
  cfg.validate();
  Rng rng(44);
  denoise::MhsaLayer attn(cfg, rng);
  std::vector<nn::ParamRef> perm_params;
  attn.collect_params("attn", perm_params);
  oracle::randomize_params(perm_params, ".wo", rng);
  const nn::Matrix x = oracle::random_matrix(3, 8, rng);
  const nn::Matrix y = attn.forward(x);

  // Permuting input rows permutes output rows the same way.
  nn::Matrix perm(3, 8);
  const std::size_t order[3] = {2, 0, 1};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 8; ++j) perm(i, j) = x(order[i], j);
  const nn::Matrix py = attn.forward(perm);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 8; ++j) CHECK(py(i, j) == doctest::Approx(y(order[i], j)).epsilon(1e-12));
}

TEST_CASE("attention gradient check") {
  denoise::SemstConfig cfg{.d_in = 8, .d_hidden = 8, .n_blocks = 1, .n_tokens = 2, .n_heads = 2};
  cfg.validate();
  Rng rng(55);
  denoise::MhsaLayer attn(cfg, rng);
  std::vector<nn::ParamRef> params;
  attn.collect_params("attn", params);
  oracle::randomize_params(params, ".wo", rng);
  const nn::Matrix x = oracle::random_matrix(3, 8, rng);
  nn::Matrix x_var = x;
  nn::Matrix dx(3, 8);
  params.push_back({"input", &x_var, &dx, true});
  const nn::Matrix target = oracle::random_matrix(3, 8, rng);

  const auto loss = [&] { return sq_loss(attn.forward(x_var), target); };
  const auto backprop = [&] {
    for (nn::ParamRef& p : params)
      if (p.grad) p.grad->fill(0.0);
    const nn::Matrix y = attn.forward(x_var);
    dx = attn.backward(sq_loss_grad(y, target));
  };
  CHECK(nn::grad_check(params, loss, backprop) < 1e-4);
}

TEST_CASE("soft threshold branch stays inside (0,1)") {
  Rng rng(6);
  denoise::SoftThresholdBranch branch(4, rng);
  const nn::Matrix x = oracle::random_matrix(5, 4, rng, 3.0);
  const nn::Matrix y = branch.forward(x, true);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) {
      CHECK(y(i, j) > 0.0);
      CHECK(y(i, j) < 1.0);
    }

  // Zero linear layer and identity BN: sigmoid(0) = one half everywhere.
  denoise::SoftThresholdBranch half(4, rng);
  std::vector<nn::ParamRef> params;
  half.collect_params("st", params);
  find_param(params, "st.linear.w").value->fill(0.0);
  find_param(params, "st.linear.b").value->fill(0.0);
  const nn::Matrix h = half.forward(x, false);
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < h.cols(); ++j) CHECK(h(i, j) == doctest::Approx(0.5));
}

TEST_CASE("soft threshold gradient check") {
  Rng rng(61);
  denoise::SoftThresholdBranch branch(6, rng);
  std::vector<nn::ParamRef> params;
  branch.collect_params("st", params);
  const nn::Matrix x = oracle::random_matrix(4, 6, rng);
  const nn::Matrix target = oracle::random_matrix(4, 6, rng);
  const auto loss = [&] { return sq_loss(branch.forward(x, false), target); };
  const auto backprop = [&] {
    for (nn::ParamRef& p : params)
      if (p.grad) p.grad->fill(0.0);
    const nn::Matrix y = branch.forward(x, false);
    branch.backward(sq_loss_grad(y, target));
  };
  CHECK(nn::grad_check(params, loss, backprop) < 1e-4);
}

TEST_CASE("residual block wiring: output minus input equals the indirect path") {
  denoise::SemstConfig cfg{.d_in = 8, .d_hidden = 8, .n_blocks = 1, .n_tokens = 2, .n_heads = 1};
  cfg.validate();
  Rng rng(71);
  denoise::SemstBlock block(cfg, rng);
  {
    std::vector<nn::ParamRef> params;
    block.collect_params("block", params);
    oracle::randomize_params(params, ".wo", rng);
  }
  const nn::Matrix x = oracle::random_matrix(4, 8, rng);
  const nn::Matrix out = block.forward(x, false);
  const nn::Matrix f = block.indirect(x, false);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j)
      CHECK(out(i, j) - x(i, j) == doctest::Approx(f(i, j)).epsilon(1e-12));
  CHECK(out.rows() == x.rows());
  CHECK(out.cols() == x.cols());
}

TEST_CASE("residual block gradient check") {
  denoise::SemstConfig cfg{.d_in = 8, .d_hidden = 8, .n_blocks = 1, .n_tokens = 2, .n_heads = 2};
  cfg.validate();
  Rng rng(81);
  denoise::SemstBlock block(cfg, rng);
  std::vector<nn::ParamRef> params;
  block.collect_params("block", params);
  oracle::randomize_params(params, ".wo", rng);
  const nn::Matrix x = oracle::random_matrix(4, 8, rng);
  const nn::Matrix target = oracle::random_matrix(4, 8, rng);
  const auto loss = [&] { return sq_loss(block.forward(x, false), target); };
  const auto backprop = [&] {
    for (nn::ParamRef& p : params)
      if (p.grad) p.grad->fill(0.0);
    const nn::Matrix y = block.forward(x, false);
    block.backward(sq_loss_grad(y, target));
  };
  CHECK(nn::grad_check(params, loss, backprop) < 1e-4);
}

TEST_CASE("shrinkage threshold mode") {
  denoise::SemstConfig cfg{.d_in = 8,
                           .d_hidden = 8,
                           .n_blocks = 1,
                           .n_tokens = 2,
                           .n_heads = 2,
                           .threshold_mode = denoise::ThresholdMode::shrinkage};
  cfg.validate();
  Rng rng(91);
  denoise::SemstBlock block(cfg, rng);
  const nn::Matrix x = oracle::random_matrix(4, 8, rng);

  // Residual wiring holds in this mode too, and the indirect response obeys
  // the shrinkage identity: |f| <= |attention response| with dead zones at 0.
  const nn::Matrix out = block.forward(x, false);
  const nn::Matrix f = block.indirect(x, false);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) {
      CHECK(out(i, j) - x(i, j) == doctest::Approx(f(i, j)).epsilon(1e-12));
      zeros += f(i, j) == 0.0 ? 1 : 0;
    }
  // Thresholds in (0,1) against an O(1) attention response leave some
  // coordinates shrunk to exactly zero.
  CHECK(zeros > 0);

  std::vector<nn::ParamRef> params;
  block.collect_params("block", params);
  oracle::randomize_params(params, ".wo", rng);
  const nn::Matrix target = oracle::random_matrix(4, 8, rng);
  const auto loss = [&] { return sq_loss(block.forward(x, false), target); };
  const auto backprop = [&] {
    for (nn::ParamRef& p : params)
      if (p.grad) p.grad->fill(0.0);
    const nn::Matrix y = block.forward(x, false);
    block.backward(sq_loss_grad(y, target));
  };
  CHECK(nn::grad_check(params, loss, backprop) < 1e-4);

  CHECK(denoise::threshold_mode_from_name("shrinkage") == denoise::ThresholdMode::shrinkage);
  CHECK(denoise::threshold_mode_name(denoise::ThresholdMode::subtract) == "subtract");
  CHECK_THROWS_AS(denoise::threshold_mode_from_name("hard"), std::invalid_argument);
}

TEST_CASE("semst network shape and unboundedness") {
  denoise::SemstConfig cfg{.d_in = 5, .d_hidden = 8, .n_blocks = 2, .n_tokens = 2, .n_heads = 2};
  denoise::SemstResNet net(cfg, 123);
  Rng rng(9);
  const nn::Matrix x = oracle::random_matrix(7, 5, rng);
  const nn::Matrix y = net.forward(x, 3, false);
  CHECK(y.rows() == 7);
  CHECK(y.cols() == 5);

  // The output head is affine, so negative predictions are reachable: zero
  // the weights and drive the bias negative.
  std::vector<nn::ParamRef> params = net.parameters();
  for (nn::ParamRef& p : params)
    if (p.name == "out.w") p.value->fill(0.0);
  for (nn::ParamRef& p : params)
    if (p.name == "out.b") p.value->fill(-2.5);
  const nn::Matrix neg = net.forward(x, 3, false);
  for (std::size_t i = 0; i < neg.rows(); ++i)
    for (std::size_t j = 0; j < neg.cols(); ++j) CHECK(neg(i, j) == doctest::Approx(-2.5));

  CHECK_THROWS_AS(net.forward(nn::Matrix(2, 4), 1, false), std::invalid_argument);
}

TEST_CASE("full semst gradient check") {
  denoise::SemstConfig cfg{.d_in = 4, .d_hidden = 8, .n_blocks = 1, .n_tokens = 2, .n_heads = 2};
  denoise::SemstResNet net(cfg, 321);
  Rng rng(10);
  const nn::Matrix x = oracle::random_matrix(4, 4, rng);
  const nn::Matrix target = oracle::random_matrix(4, 4, rng);
  std::vector<nn::ParamRef> params = net.parameters();
  oracle::randomize_params(params, ".wo", rng);
  oracle::randomize_params(params, "out.w", rng);
  const std::vector<int> t = {1, 5, 9, 2};

  const auto loss = [&] { return sq_loss(net.forward(x, t, false), target); };
  const auto backprop = [&] {
    net.zero_grad();
    const nn::Matrix y = net.forward(x, t, false);
    net.backward(sq_loss_grad(y, target));
  };
  CHECK(nn::grad_check(params, loss, backprop) < 1e-4);
}

TEST_CASE("mlp denoiser") {
  denoise::MlpConfig cfg{.d_in = 3, .hidden = {6, 6}};
  denoise::MlpDenoiser net(cfg, 99);
  Rng rng(12);
  const nn::Matrix x = oracle::random_matrix(5, 3, rng);
  const nn::Matrix y = net.forward(x, 2, false);
  CHECK(y.rows() == 5);
  CHECK(y.cols() == 3);

  // One hidden layer with zero weights: the output is the final bias row.
  denoise::MlpConfig tiny{.d_in = 2, .hidden = {4}};
  denoise::MlpDenoiser constant(tiny, 5);
  std::vector<nn::ParamRef> params = constant.parameters();
  for (nn::ParamRef& p : params) {
    if (p.name == "layer1.w") p.value->fill(0.0);
    if (p.name == "layer1.b") p.value->fill(0.75);
  }
  const nn::Matrix c = constant.forward(oracle::random_matrix(3, 2, rng), 1, false);
  for (std::size_t i = 0; i < c.rows(); ++i)
    for (std::size_t j = 0; j < c.cols(); ++j) CHECK(c(i, j) == doctest::Approx(0.75));

  denoise::MlpConfig g{.d_in = 3, .hidden = {5}};
  denoise::MlpDenoiser gnet(g, 31);
  const nn::Matrix gx = oracle::random_matrix(4, 3, rng);
  const nn::Matrix target = oracle::random_matrix(4, 3, rng);
  std::vector<nn::ParamRef> gparams = gnet.parameters();
  oracle::randomize_params(gparams, "layer1.w", rng);
  const std::vector<int> t = {3, 1, 4, 1};
  const auto loss = [&] { return sq_loss(gnet.forward(gx, t, false), target); };
  const auto backprop = [&] {
    gnet.zero_grad();
    const nn::Matrix y = gnet.forward(gx, t, false);
    gnet.backward(sq_loss_grad(y, target));
  };
  CHECK(nn::grad_check(gparams, loss, backprop) < 1e-4);
}
