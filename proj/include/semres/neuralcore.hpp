#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "semres/matrix.hpp"
#include "semres/rng.hpp"

namespace semres::nn {

// Handle to one parameter tensor of a model. Non-trainable entries (batch
// norm running statistics) are carried through checkpoints but skipped by
// the optimizer.
struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
  Matrix* grad = nullptr;  // null for non-trainable state
  bool trainable = true;
};

// Fan-based uniform init in +-sqrt(6/(d_in+d_out)).
void init_uniform_fan(Matrix& w, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Fully connected layer: Y = X W^T + b, with gradient accumulation.
class LinearLayer {
 public:
  LinearLayer(std::size_t d_in, std::size_t d_out, Rng& rng);

  Matrix forward(const Matrix& x);
  // Returns dL/dX and accumulates dW, db.
  Matrix backward(const Matrix& dy);

  std::size_t d_in() const { return w_.cols(); }
  std::size_t d_out() const { return w_.rows(); }
  Matrix& weights() { return w_; }
  Matrix& bias() { return b_; }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);

 private:
  Matrix w_, b_;    // w: d_out x d_in, b: 1 x d_out
  Matrix dw_, db_;
  Matrix x_cache_;
};

enum class BnMode { train, eval };

// Batch normalization over matrix columns. Train mode normalizes by biased
// batch statistics and updates the running estimates with the configured
// momentum; eval mode normalizes by the running estimates.
class BatchNormLayer {
 public:
  explicit BatchNormLayer(std::size_t d, double momentum = 0.1, double eps = 1e-5);

  Matrix forward(const Matrix& x, BnMode mode);
  Matrix backward(const Matrix& dy);

  std::size_t width() const { return gamma_.cols(); }
  Matrix& gamma() { return gamma_; }
  Matrix& beta() { return beta_; }
  Matrix& running_mean() { return running_mean_; }
  Matrix& running_var() { return running_var_; }

  void collect_params(const std::string& prefix, std::vector<ParamRef>& out);

 private:
  Matrix gamma_, beta_;
  Matrix running_mean_, running_var_;
  Matrix dgamma_, dbeta_;
  double momentum_, eps_;

  BnMode mode_cache_ = BnMode::train;
  Matrix xhat_cache_;
  std::vector<double> inv_std_cache_;
};

// Stateless activations with exact backward passes.
Matrix relu(const Matrix& x);
Matrix relu_backward(const Matrix& dy, const Matrix& x);  // x = forward input
Matrix sigmoid(const Matrix& x);
Matrix sigmoid_backward(const Matrix& dy, const Matrix& y);  // y = forward output
Matrix softmax_rows(const Matrix& x);
Matrix softmax_rows_backward(const Matrix& dy, const Matrix& y);

// Adam with bias correction. Moment buffers are allocated on the first step
// and keyed by parameter order, which must not change between steps.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(std::span<ParamRef> params);
  long step_count() const { return step_count_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long step_count_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Compares analytic gradients against central finite differences.
//
// `backprop` must leave the analytic gradients for the current point in the
// params' grad buffers (typically zero-grads + forward + backward); `loss`
// must evaluate the same scalar objective without touching gradients.
// Returns the max relative error |a - n| / max(|a|, |n|, 1e-8) over every
// trainable parameter entry. Throws if the parameter count exceeds the cap.
double grad_check(std::span<ParamRef> params, const std::function<double()>& loss,
                  const std::function<void()>& backprop, double h = 1e-5,
                  std::size_t max_params = 20000);

}  // namespace semres::nn
