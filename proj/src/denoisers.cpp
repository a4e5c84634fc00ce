#include "semres/denoisers.hpp"

#include <cmath>
#include <stdexcept>

namespace semres::denoise {

std::string threshold_mode_name(ThresholdMode mode) {
  return mode == ThresholdMode::shrinkage ? "shrinkage" : "subtract";
}

ThresholdMode threshold_mode_from_name(const std::string& name) {
  if (name == "shrinkage") return ThresholdMode::shrinkage;
  if (name == "subtract") return ThresholdMode::subtract;
  throw std::invalid_argument("unknown threshold mode '" + name + "'");
}

std::vector<double> timestep_embed(int t, int d) {
  if (d < 1) throw std::invalid_argument("timestep_embed: width must be positive");
  std::vector<double> e(d);
  for (int i = 0; 2 * i < d; ++i) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
    const double angle = static_cast<double>(t) * freq;
    e[2 * i] = std::sin(angle);
    if (2 * i + 1 < d) e[2 * i + 1] = std::cos(angle);
  }
  return e;
}

void SemstConfig::validate() const {
  if (d_in < 1) throw std::invalid_argument("SemstConfig: d_in must be positive");
  if (n_blocks < 1) throw std::invalid_argument("SemstConfig: need at least one block");
  if (n_tokens < 1 || d_hidden % n_tokens != 0)
    throw std::invalid_argument("SemstConfig: d_hidden must be divisible by n_tokens");
  if (n_heads < 1 || (d_hidden / n_tokens) % n_heads != 0)
    throw std::invalid_argument("SemstConfig: token width must be divisible by n_heads");
}

void MlpConfig::validate() const {
  if (d_in < 1) throw std::invalid_argument("MlpConfig: d_in must be positive");
  if (hidden.empty()) throw std::invalid_argument("MlpConfig: need at least one hidden layer");
  for (const int h : hidden)
    if (h < 1) throw std::invalid_argument("MlpConfig: hidden widths must be positive");
}

nn::Matrix Denoiser::forward(const nn::Matrix& x, int t, bool train) {
  std::vector<int> ts(x.rows(), t);
  return forward(x, ts, train);
}

void Denoiser::zero_grad() {
  for (nn::ParamRef& p : parameters())
    if (p.grad) p.grad->fill(0.0);
}

FcBlock::FcBlock(std::size_t d_in, std::size_t d_out, Rng& rng)
    : linear_(d_in, d_out, rng), bn_(d_out) {}

nn::Matrix FcBlock::forward(const nn::Matrix& x, bool train) {
  pre_relu_ = bn_.forward(linear_.forward(x), train ? nn::BnMode::train : nn::BnMode::eval);
  return nn::relu(pre_relu_);
}

nn::Matrix FcBlock::backward(const nn::Matrix& dy) {
  return linear_.backward(bn_.backward(nn::relu_backward(dy, pre_relu_)));
}

void FcBlock::collect_params(const std::string& prefix, std::vector<nn::ParamRef>& out) {
  linear_.collect_params(prefix + ".linear", out);
  bn_.collect_params(prefix + ".bn", out);
}

MhsaLayer::MhsaLayer(const SemstConfig& cfg, Rng& rng)
    : d_hidden_(cfg.d_hidden),
      n_tokens_(cfg.n_tokens),
      d_tok_(cfg.d_tok()),
      n_heads_(cfg.n_heads),
      d_head_(cfg.d_head()),
      wo_(cfg.d_tok(), cfg.d_tok()),
      dwo_(cfg.d_tok(), cfg.d_tok()) {
  for (int h = 0; h < n_heads_; ++h) {
    wq_.emplace_back(d_tok_, d_head_);
    wk_.emplace_back(d_tok_, d_head_);
    wv_.emplace_back(d_tok_, d_head_);
    nn::init_uniform_fan(wq_.back(), d_tok_, d_head_, rng);
    nn::init_uniform_fan(wk_.back(), d_tok_, d_head_, rng);
    nn::init_uniform_fan(wv_.back(), d_tok_, d_head_, rng);
    dwq_.emplace_back(d_tok_, d_head_);
    dwk_.emplace_back(d_tok_, d_head_);
    dwv_.emplace_back(d_tok_, d_head_);
  }
  nn::init_uniform_fan(wo_, d_tok_, d_tok_, rng);
}

nn::Matrix MhsaLayer::forward(const nn::Matrix& x) {
  if (x.cols() != static_cast<std::size_t>(d_hidden_))
    throw std::invalid_argument("MhsaLayer: input width mismatch");
  const std::size_t n = x.rows();
  const std::size_t nt = static_cast<std::size_t>(n_tokens_);
  const std::size_t dt = static_cast<std::size_t>(d_tok_);

  // Row-major reshape: token j of sample i is the j-th d_tok slice of row i.
  tokens_ = nn::Matrix(n * nt, dt);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < nt; ++j)
      for (std::size_t c = 0; c < dt; ++c) tokens_(i * nt + j, c) = x(i, j * dt + c);

  const double scale = 1.0 / std::sqrt(static_cast<double>(d_head_));
  q_.clear();
  k_.clear();
  v_.clear();
  attn_.clear();
  concat_ = nn::Matrix(n * nt, dt);
  for (int h = 0; h < n_heads_; ++h) {
    q_.push_back(nn::matmul(tokens_, wq_[h]));
    k_.push_back(nn::matmul(tokens_, wk_[h]));
    v_.push_back(nn::matmul(tokens_, wv_[h]));
    nn::Matrix attn(n * nt, nt);
    for (std::size_t i = 0; i < n; ++i) {
      const nn::Matrix qi = q_[h].slice_rows(i * nt, (i + 1) * nt);
      const nn::Matrix ki = k_[h].slice_rows(i * nt, (i + 1) * nt);
      nn::Matrix scores = nn::matmul_nt(qi, ki);
      scores *= scale;
      attn.set_rows(i * nt, nn::softmax_rows(scores));
    }
    attn_.push_back(std::move(attn));
    for (std::size_t i = 0; i < n; ++i) {
      const nn::Matrix ai = attn_[h].slice_rows(i * nt, (i + 1) * nt);
      const nn::Matrix vi = v_[h].slice_rows(i * nt, (i + 1) * nt);
      const nn::Matrix oi = nn::matmul(ai, vi);
      for (std::size_t j = 0; j < nt; ++j)
        for (int c = 0; c < d_head_; ++c)
          concat_(i * nt + j, static_cast<std::size_t>(h * d_head_ + c)) = oi(j, static_cast<std::size_t>(c));
    }
  }

  const nn::Matrix out_tokens = nn::matmul(concat_, wo_);
  nn::Matrix y(n, static_cast<std::size_t>(d_hidden_));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < nt; ++j)
      for (std::size_t c = 0; c < dt; ++c) y(i, j * dt + c) = out_tokens(i * nt + j, c);
  nn::ensure_finite(y, "attention forward");
  return y;
}

nn::Matrix MhsaLayer::backward(const nn::Matrix& dy) {
  const std::size_t nt = static_cast<std::size_t>(n_tokens_);
  const std::size_t dt = static_cast<std::size_t>(d_tok_);
  const std::size_t n = dy.rows();
  if (tokens_.rows() != n * nt) throw std::invalid_argument("MhsaLayer: gradient shape mismatch");

  nn::Matrix d_out_tokens(n * nt, dt);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < nt; ++j)
      for (std::size_t c = 0; c < dt; ++c) d_out_tokens(i * nt + j, c) = dy(i, j * dt + c);

  dwo_ += nn::matmul_tn(concat_, d_out_tokens);
  const nn::Matrix d_concat = nn::matmul_nt(d_out_tokens, wo_);

  nn::Matrix d_tokens(n * nt, dt);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_head_));
  for (int h = 0; h < n_heads_; ++h) {
    // Slice this head's share of the concatenated gradient.
    nn::Matrix d_oh(n * nt, static_cast<std::size_t>(d_head_));
    for (std::size_t r = 0; r < n * nt; ++r)
      for (int c = 0; c < d_head_; ++c)
        d_oh(r, static_cast<std::size_t>(c)) = d_concat(r, static_cast<std::size_t>(h * d_head_ + c));

    nn::Matrix d_q(n * nt, static_cast<std::size_t>(d_head_));
    nn::Matrix d_k(n * nt, static_cast<std::size_t>(d_head_));
    nn::Matrix d_v(n * nt, static_cast<std::size_t>(d_head_));
    for (std::size_t i = 0; i < n; ++i) {
      const nn::Matrix ai = attn_[h].slice_rows(i * nt, (i + 1) * nt);
      const nn::Matrix vi = v_[h].slice_rows(i * nt, (i + 1) * nt);
      const nn::Matrix qi = q_[h].slice_rows(i * nt, (i + 1) * nt);
      const nn::Matrix ki = k_[h].slice_rows(i * nt, (i + 1) * nt);
      const nn::Matrix d_oi = d_oh.slice_rows(i * nt, (i + 1) * nt);

      const nn::Matrix d_ai = nn::matmul_nt(d_oi, vi);
      d_v.set_rows(i * nt, nn::matmul_tn(ai, d_oi));
      nn::Matrix d_scores = nn::softmax_rows_backward(d_ai, ai);
      d_scores *= scale;
      d_q.set_rows(i * nt, nn::matmul(d_scores, ki));
      d_k.set_rows(i * nt, nn::matmul_tn(d_scores, qi));
    }
    dwq_[h] += nn::matmul_tn(tokens_, d_q);
    dwk_[h] += nn::matmul_tn(tokens_, d_k);
    dwv_[h] += nn::matmul_tn(tokens_, d_v);
    d_tokens += nn::matmul_nt(d_q, wq_[h]);
    d_tokens += nn::matmul_nt(d_k, wk_[h]);
    d_tokens += nn::matmul_nt(d_v, wv_[h]);
  }

  nn::Matrix dx(n, static_cast<std::size_t>(d_hidden_));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < nt; ++j)
      for (std::size_t c = 0; c < dt; ++c) dx(i, j * dt + c) = d_tokens(i * nt + j, c);
  nn::ensure_finite(dx, "attention backward");
  return dx;
}

void MhsaLayer::collect_params(const std::string& prefix, std::vector<nn::ParamRef>& out) {
  for (int h = 0; h < n_heads_; ++h) {
    const std::string hs = std::to_string(h);
    out.push_back({prefix + ".wq" + hs, &wq_[h], &dwq_[h], true});
    out.push_back({prefix + ".wk" + hs, &wk_[h], &dwk_[h], true});
    out.push_back({prefix + ".wv" + hs, &wv_[h], &dwv_[h], true});
  }
  out.push_back({prefix + ".wo", &wo_, &dwo_, true});
}

SoftThresholdBranch::SoftThresholdBranch(std::size_t d, Rng& rng) : linear_(d, d, rng), bn_(d) {}

nn::Matrix SoftThresholdBranch::forward(const nn::Matrix& x, bool train) {
  post_sigmoid_ =
      nn::sigmoid(bn_.forward(linear_.forward(x), train ? nn::BnMode::train : nn::BnMode::eval));
  return post_sigmoid_;
}

nn::Matrix SoftThresholdBranch::backward(const nn::Matrix& dy) {
  return linear_.backward(bn_.backward(nn::sigmoid_backward(dy, post_sigmoid_)));
}

void SoftThresholdBranch::collect_params(const std::string& prefix, std::vector<nn::ParamRef>& out) {
  linear_.collect_params(prefix + ".linear", out);
  bn_.collect_params(prefix + ".bn", out);
}

SemstBlock::SemstBlock(const SemstConfig& cfg, Rng& rng)
    : mode_(cfg.threshold_mode),
      fc_(cfg.d_hidden, cfg.d_hidden, rng),
      attn_(cfg, rng),
      threshold_(cfg.d_hidden, rng) {}

nn::Matrix SemstBlock::indirect(const nn::Matrix& x, bool train) {
  const nn::Matrix u = fc_.forward(x, train);
  attn_out_ = attn_.forward(u);
  tau_ = threshold_.forward(u, train);
  if (mode_ == ThresholdMode::subtract) return attn_out_ - tau_;
  nn::Matrix f(attn_out_.rows(), attn_out_.cols());
  for (std::size_t i = 0; i < f.rows(); ++i)
    for (std::size_t j = 0; j < f.cols(); ++j) {
      const double a = attn_out_(i, j);
      const double shrunk = std::abs(a) - tau_(i, j);
      f(i, j) = shrunk > 0.0 ? (a > 0.0 ? shrunk : -shrunk) : 0.0;
    }
  return f;
}

nn::Matrix SemstBlock::forward(const nn::Matrix& x, bool train) {
  return x + indirect(x, train);
}

nn::Matrix SemstBlock::backward(const nn::Matrix& dy) {
  nn::Matrix d_attn(dy.rows(), dy.cols());
  nn::Matrix d_tau(dy.rows(), dy.cols());
  if (mode_ == ThresholdMode::subtract) {
    for (std::size_t i = 0; i < dy.rows(); ++i)
      for (std::size_t j = 0; j < dy.cols(); ++j) {
        d_attn(i, j) = dy(i, j);
        d_tau(i, j) = -dy(i, j);
      }
  } else {
    for (std::size_t i = 0; i < dy.rows(); ++i)
      for (std::size_t j = 0; j < dy.cols(); ++j) {
        const double a = attn_out_(i, j);
        const bool open = std::abs(a) > tau_(i, j);
        d_attn(i, j) = open ? dy(i, j) : 0.0;
        d_tau(i, j) = open ? (a > 0.0 ? -dy(i, j) : dy(i, j)) : 0.0;
      }
  }
  nn::Matrix du = attn_.backward(d_attn);
  du += threshold_.backward(d_tau);
  return dy + fc_.backward(du);
}

void SemstBlock::collect_params(const std::string& prefix, std::vector<nn::ParamRef>& out) {
  fc_.collect_params(prefix + ".fc", out);
  attn_.collect_params(prefix + ".attn", out);
  threshold_.collect_params(prefix + ".threshold", out);
}

namespace {

Rng make_init_rng(std::uint64_t seed) { return Rng(Rng::derive(seed, "denoiser-init")); }

void add_time_embedding(nn::Matrix& h, std::span<const int> t) {
  if (t.size() != h.rows()) throw std::invalid_argument("forward: one timestep per row required");
  const int d = static_cast<int>(h.cols());
  for (std::size_t i = 0; i < h.rows(); ++i) {
    const std::vector<double> e = timestep_embed(t[i], d);
    for (std::size_t j = 0; j < h.cols(); ++j) h(i, j) += e[j];
  }
}

}  // namespace

SemstResNet::SemstResNet(const SemstConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng = make_init_rng(init_seed);
  fc_in_ = std::make_unique<FcBlock>(cfg_.d_in, cfg_.d_hidden, rng);
  for (int b = 0; b < cfg_.n_blocks; ++b) blocks_.push_back(std::make_unique<SemstBlock>(cfg_, rng));
  out_ = std::make_unique<nn::LinearLayer>(cfg_.d_hidden, cfg_.d_in, rng);
}

nn::Matrix SemstResNet::forward(const nn::Matrix& x, std::span<const int> t, bool train) {
  if (x.cols() != static_cast<std::size_t>(cfg_.d_in))
    throw std::invalid_argument("SemstResNet: input width mismatch");
  nn::Matrix h = fc_in_->forward(x, train);
  add_time_embedding(h, t);
  for (auto& block : blocks_) h = block->forward(h, train);
  return out_->forward(h);
}

nn::Matrix SemstResNet::backward(const nn::Matrix& d_out) {
  nn::Matrix dh = out_->backward(d_out);
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) dh = (*it)->backward(dh);
  return fc_in_->backward(dh);
}

std::vector<nn::ParamRef> SemstResNet::parameters() {
  std::vector<nn::ParamRef> out;
  fc_in_->collect_params("fc_in", out);
  for (std::size_t b = 0; b < blocks_.size(); ++b)
    blocks_[b]->collect_params("block" + std::to_string(b), out);
  out_->collect_params("out", out);
  return out;
}

MlpDenoiser::MlpDenoiser(const MlpConfig& cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng = make_init_rng(init_seed);
  int prev = cfg_.d_in;
  for (const int h : cfg_.hidden) {
    layers_.push_back(std::make_unique<nn::LinearLayer>(prev, h, rng));
    prev = h;
  }
  layers_.push_back(std::make_unique<nn::LinearLayer>(prev, cfg_.d_in, rng));
}

nn::Matrix MlpDenoiser::forward(const nn::Matrix& x, std::span<const int> t, bool train) {
  (void)train;  // no normalization layers
  if (x.cols() != static_cast<std::size_t>(cfg_.d_in))
    throw std::invalid_argument("MlpDenoiser: input width mismatch");
  pre_relu_.assign(layers_.size() - 1, nn::Matrix());
  nn::Matrix h = x;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
    pre_relu_[l] = layers_[l]->forward(h);
    h = nn::relu(pre_relu_[l]);
    if (l == 0) add_time_embedding(h, t);
  }
  return layers_.back()->forward(h);
}

nn::Matrix MlpDenoiser::backward(const nn::Matrix& d_out) {
  nn::Matrix dh = layers_.back()->backward(d_out);
  for (std::size_t l = layers_.size() - 1; l-- > 0;) {
    dh = layers_[l]->backward(nn::relu_backward(dh, pre_relu_[l]));
  }
  return dh;
}

std::vector<nn::ParamRef> MlpDenoiser::parameters() {
  std::vector<nn::ParamRef> out;
  for (std::size_t l = 0; l < layers_.size(); ++l)
    layers_[l]->collect_params("layer" + std::to_string(l), out);
  return out;
}

}  // namespace semres::denoise
