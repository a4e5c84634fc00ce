#include "semres/neuralcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace semres::nn {

void init_uniform_fan(Matrix& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
}

LinearLayer::LinearLayer(std::size_t d_in, std::size_t d_out, Rng& rng)
    : w_(d_out, d_in), b_(1, d_out), dw_(d_out, d_in), db_(1, d_out) {
  init_uniform_fan(w_, d_in, d_out, rng);
}

Matrix LinearLayer::forward(const Matrix& x) {
  if (x.cols() != w_.cols()) throw std::invalid_argument("LinearLayer: input width mismatch");
  x_cache_ = x;
  Matrix y = matmul_nt(x, w_);
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) y(i, j) += b_(0, j);
  ensure_finite(y, "linear forward");
  return y;
}

Matrix LinearLayer::backward(const Matrix& dy) {
  if (dy.cols() != w_.rows() || dy.rows() != x_cache_.rows())
    throw std::invalid_argument("LinearLayer: gradient shape mismatch");
  dw_ += matmul_tn(dy, x_cache_);
  for (std::size_t i = 0; i < dy.rows(); ++i)
    for (std::size_t j = 0; j < dy.cols(); ++j) db_(0, j) += dy(i, j);
  Matrix dx = matmul(dy, w_);
  ensure_finite(dx, "linear backward");
  return dx;
}

void LinearLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".w", &w_, &dw_, true});
  out.push_back({prefix + ".b", &b_, &db_, true});
}

BatchNormLayer::BatchNormLayer(std::size_t d, double momentum, double eps)
    : gamma_(1, d, 1.0),
      beta_(1, d, 0.0),
      running_mean_(1, d, 0.0),
      running_var_(1, d, 1.0),
      dgamma_(1, d),
      dbeta_(1, d),
      momentum_(momentum),
      eps_(eps) {
  if (eps <= 0.0) throw std::invalid_argument("BatchNormLayer: eps must be positive");
}

Matrix BatchNormLayer::forward(const Matrix& x, BnMode mode) {
  if (x.cols() != width()) throw std::invalid_argument("BatchNormLayer: input width mismatch");
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  mode_cache_ = mode;
  xhat_cache_ = Matrix(n, d);
  inv_std_cache_.assign(d, 0.0);

  if (mode == BnMode::train) {
    if (n < 2) throw std::invalid_argument("BatchNormLayer: train mode needs batch size >= 2");
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double c = x(i, j) - mean;
        var += c * c;
      }
      var /= static_cast<double>(n);
      const double inv_std = 1.0 / std::sqrt(var + eps_);
      inv_std_cache_[j] = inv_std;
      for (std::size_t i = 0; i < n; ++i) xhat_cache_(i, j) = (x(i, j) - mean) * inv_std;
      running_mean_(0, j) = (1.0 - momentum_) * running_mean_(0, j) + momentum_ * mean;
      running_var_(0, j) = (1.0 - momentum_) * running_var_(0, j) + momentum_ * var;
    }
  } else {
    for (std::size_t j = 0; j < d; ++j) {
      const double inv_std = 1.0 / std::sqrt(running_var_(0, j) + eps_);
      inv_std_cache_[j] = inv_std;
      for (std::size_t i = 0; i < n; ++i)
        xhat_cache_(i, j) = (x(i, j) - running_mean_(0, j)) * inv_std;
    }
  }

  Matrix y(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) y(i, j) = gamma_(0, j) * xhat_cache_(i, j) + beta_(0, j);
  ensure_finite(y, "batchnorm forward");
  return y;
}

Matrix BatchNormLayer::backward(const Matrix& dy) {
  const std::size_t n = dy.rows();
  const std::size_t d = dy.cols();
  if (!dy.same_shape(xhat_cache_)) throw std::invalid_argument("BatchNormLayer: gradient shape mismatch");

  Matrix dx(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum_dy += dy(i, j);
      sum_dy_xhat += dy(i, j) * xhat_cache_(i, j);
    }
    dbeta_(0, j) += sum_dy;
    dgamma_(0, j) += sum_dy_xhat;
    const double g = gamma_(0, j);
    const double inv_std = inv_std_cache_[j];
    if (mode_cache_ == BnMode::train) {
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        dx(i, j) = g * inv_std *
                   (dy(i, j) - inv_n * sum_dy - xhat_cache_(i, j) * inv_n * sum_dy_xhat);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) dx(i, j) = dy(i, j) * g * inv_std;
    }
  }
  ensure_finite(dx, "batchnorm backward");
  return dx;
}

void BatchNormLayer::collect_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".gamma", &gamma_, &dgamma_, true});
  out.push_back({prefix + ".beta", &beta_, &dbeta_, true});
  out.push_back({prefix + ".running_mean", &running_mean_, nullptr, false});
  out.push_back({prefix + ".running_var", &running_var_, nullptr, false});
}

Matrix relu(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) = x(i, j) > 0.0 ? x(i, j) : 0.0;
  return y;
}

Matrix relu_backward(const Matrix& dy, const Matrix& x) {
  if (!dy.same_shape(x)) throw std::invalid_argument("relu_backward: shape mismatch");
  Matrix dx(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) dx(i, j) = x(i, j) > 0.0 ? dy(i, j) : 0.0;
  return dx;
}

Matrix sigmoid(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) = 1.0 / (1.0 + std::exp(-x(i, j)));
  return y;
}

Matrix sigmoid_backward(const Matrix& dy, const Matrix& y) {
  if (!dy.same_shape(y)) throw std::invalid_argument("sigmoid_backward: shape mismatch");
  Matrix dx(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) dx(i, j) = dy(i, j) * y(i, j) * (1.0 - y(i, j));
  return dx;
}

Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double mx = x(i, 0);
    for (std::size_t j = 1; j < x.cols(); ++j) mx = std::max(mx, x(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      y(i, j) = std::exp(x(i, j) - mx);
      sum += y(i, j);
    }
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) /= sum;
  }
  return y;
}

Matrix softmax_rows_backward(const Matrix& dy, const Matrix& y) {
  if (!dy.same_shape(y)) throw std::invalid_argument("softmax_rows_backward: shape mismatch");
  Matrix dx(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) dot += dy(i, j) * y(i, j);
    for (std::size_t j = 0; j < y.cols(); ++j) dx(i, j) = y(i, j) * (dy(i, j) - dot);
  }
  return dx;
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (lr <= 0.0) throw std::invalid_argument("Adam: lr must be positive");
}

void Adam::step(std::span<ParamRef> params) {
  if (m_.empty()) {
    for (const ParamRef& p : params) {
      m_.emplace_back(p.trainable ? p.value->size() : 0, 0.0);
      v_.emplace_back(p.trainable ? p.value->size() : 0, 0.0);
    }
  }
  if (m_.size() != params.size()) throw std::invalid_argument("Adam: parameter list changed size");
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ParamRef& p = params[pi];
    if (!p.trainable) continue;
    if (m_[pi].size() != p.value->size()) throw std::invalid_argument("Adam: parameter shape changed");
    double* val = p.value->data();
    const double* g = p.grad->data();
    for (std::size_t i = 0; i < p.value->size(); ++i) {
      if (!std::isfinite(g[i]))
        throw std::runtime_error("Adam: non-finite gradient in parameter " + p.name);
      m_[pi][i] = beta1_ * m_[pi][i] + (1.0 - beta1_) * g[i];
      v_[pi][i] = beta2_ * v_[pi][i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m_[pi][i] / bc1;
      const double vhat = v_[pi][i] / bc2;
      val[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

double grad_check(std::span<ParamRef> params, const std::function<double()>& loss,
                  const std::function<void()>& backprop, double h, std::size_t max_params) {
  std::size_t total = 0;
  for (const ParamRef& p : params)
    if (p.trainable) total += p.value->size();
  if (total > max_params)
    throw std::invalid_argument("grad_check: parameter count " + std::to_string(total) +
                                " exceeds cap " + std::to_string(max_params));

  backprop();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const ParamRef& p : params) {
    if (p.trainable)
      analytic.emplace_back(p.grad->data(), p.grad->data() + p.grad->size());
    else
      analytic.emplace_back();
  }

  double max_rel = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ParamRef& p = params[pi];
    if (!p.trainable) continue;
    for (std::size_t i = 0; i < p.value->size(); ++i) {
      double* slot = p.value->data() + i;
      const double saved = *slot;
      *slot = saved + h;
      const double lp = loss();
      *slot = saved - h;
      const double lm = loss();
      *slot = saved;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace semres::nn
