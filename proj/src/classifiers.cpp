#include "semres/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace semres::classify {

std::string kind_name(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::gaussian_nb: return "gaussian_nb";
    case ClassifierKind::bernoulli_nb: return "bernoulli_nb";
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::logistic_regression: return "logistic_regression";
    case ClassifierKind::decision_tree: return "decision_tree";
  }
  return "?";
}

ClassifierKind kind_from_name(const std::string& name) {
  for (const ClassifierKind k : all_kinds())
    if (kind_name(k) == name) return k;
  throw std::invalid_argument("unknown classifier '" + name + "'");
}

const std::vector<ClassifierKind>& all_kinds() {
  static const std::vector<ClassifierKind> kinds = {
      ClassifierKind::gaussian_nb, ClassifierKind::bernoulli_nb, ClassifierKind::knn,
      ClassifierKind::logistic_regression, ClassifierKind::decision_tree};
  return kinds;
}

namespace {

struct TreeNode {
  bool leaf = true;
  double p_pos = 0.0;
  std::size_t feature = 0;
  double threshold = 0.0;
  int left = -1;   // index into the node pool
  int right = -1;
};

}  // namespace

struct Classifier::Impl {
  ClassifierConfig cfg;
  std::size_t width = 0;

  // gaussian_nb / bernoulli_nb
  double log_prior[2] = {0.0, 0.0};
  std::vector<double> mean[2], var[2];    // gaussian, per class per feature
  std::vector<double> log_rate1[2], log_rate0[2];  // bernoulli log p(b=1|c), log p(b=0|c)

  // knn
  nn::Matrix train_x;
  std::vector<std::uint8_t> train_y;
  int k_eff = 0;

  // logistic regression
  std::vector<double> w;
  double b = 0.0;

  // decision tree
  std::vector<TreeNode> nodes;

  double score_one(ClassifierKind kind, const double* x) const;
};

namespace {

void fit_gaussian_nb(Classifier::Impl& im, const nn::Matrix& x, const std::vector<std::uint8_t>& y) {
  const std::size_t n = x.rows(), d = x.cols();
  std::size_t count[2] = {0, 0};
  for (const auto v : y) count[v ? 1 : 0]++;
  for (int c = 0; c < 2; ++c) {
    im.mean[c].assign(d, 0.0);
    im.var[c].assign(d, 0.0);
    im.log_prior[c] = std::log(static_cast<double>(count[c]) / static_cast<double>(n));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) im.mean[y[i] ? 1 : 0][j] += x(i, j);
  for (int c = 0; c < 2; ++c)
    for (std::size_t j = 0; j < d; ++j) im.mean[c][j] /= static_cast<double>(count[c]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const int c = y[i] ? 1 : 0;
      const double diff = x(i, j) - im.mean[c][j];
      im.var[c][j] += diff * diff;
    }
  // Smoothing scaled by the largest overall feature variance.
  std::vector<double> overall_mean(d, 0.0), overall_var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) overall_mean[j] += x(i, j);
  for (std::size_t j = 0; j < d; ++j) overall_mean[j] /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = x(i, j) - overall_mean[j];
      overall_var[j] += diff * diff / static_cast<double>(n);
    }
  double max_var = 0.0;
  for (const double v : overall_var) max_var = std::max(max_var, v);
  const double eps = std::max(im.cfg.gnb_var_smoothing * max_var, im.cfg.gnb_var_smoothing);
  for (int c = 0; c < 2; ++c)
    for (std::size_t j = 0; j < d; ++j)
      im.var[c][j] = im.var[c][j] / static_cast<double>(count[c]) + eps;
}

void fit_bernoulli_nb(Classifier::Impl& im, const nn::Matrix& x, const std::vector<std::uint8_t>& y) {
  const std::size_t n = x.rows(), d = x.cols();
  std::size_t count[2] = {0, 0};
  for (const auto v : y) count[v ? 1 : 0]++;
  std::vector<double> ones[2];
  for (int c = 0; c < 2; ++c) {
    ones[c].assign(d, 0.0);
    im.log_prior[c] = std::log(static_cast<double>(count[c]) / static_cast<double>(n));
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (x(i, j) > im.cfg.bernoulli_binarize) ones[y[i] ? 1 : 0][j] += 1.0;
  const double a = im.cfg.bernoulli_laplace;
  for (int c = 0; c < 2; ++c) {
    im.log_rate1[c].assign(d, 0.0);
    im.log_rate0[c].assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      const double rate = (ones[c][j] + a) / (static_cast<double>(count[c]) + 2.0 * a);
      im.log_rate1[c][j] = std::log(rate);
      im.log_rate0[c][j] = std::log(1.0 - rate);
    }
  }
}

void fit_logreg(Classifier::Impl& im, const nn::Matrix& x, const std::vector<std::uint8_t>& y) {
  const std::size_t n = x.rows(), d = x.cols();
  im.w.assign(d, 0.0);
  im.b = 0.0;
  std::vector<double> grad_w(d);
  for (int it = 0; it < im.cfg.logreg_iters; ++it) {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = im.b;
      for (std::size_t j = 0; j < d; ++j) z += im.w[j] * x(i, j);
      const double err = 1.0 / (1.0 + std::exp(-z)) - (y[i] ? 1.0 : 0.0);
      for (std::size_t j = 0; j < d; ++j) grad_w[j] += err * x(i, j);
      grad_b += err;
    }
    for (std::size_t j = 0; j < d; ++j)
      im.w[j] -= im.cfg.logreg_lr * (grad_w[j] / static_cast<double>(n) + im.cfg.logreg_l2 * im.w[j]);
    im.b -= im.cfg.logreg_lr * grad_b / static_cast<double>(n);
  }
}

double gini_of(std::size_t pos, std::size_t total) {
  if (total == 0) return 0.0;
  const double p = static_cast<double>(pos) / static_cast<double>(total);
  return 2.0 * p * (1.0 - p);
}

int build_tree(Classifier::Impl& im, const nn::Matrix& x, const std::vector<std::uint8_t>& y,
               std::vector<std::size_t>& idx, int depth) {
  const std::size_t n = idx.size();
  std::size_t pos = 0;
  for (const std::size_t i : idx) pos += y[i] ? 1 : 0;

  TreeNode node;
  node.p_pos = static_cast<double>(pos) / static_cast<double>(n);
  const bool pure = pos == 0 || pos == n;
  if (pure || depth >= im.cfg.tree_max_depth || n < static_cast<std::size_t>(im.cfg.tree_min_split)) {
    im.nodes.push_back(node);
    return static_cast<int>(im.nodes.size() - 1);
  }

  // Best Gini split over midpoints of consecutive distinct values. Only a
  // strictly better impurity replaces the incumbent, so the first (lowest
  // feature, lowest threshold) candidate wins ties.
  const double parent_gini = gini_of(pos, n);
  double best_gain = 0.0;
  std::size_t best_feature = 0;
  double best_threshold = 0.0;
  bool found = false;
  std::vector<std::pair<double, std::uint8_t>> vals(n);
  for (std::size_t f = 0; f < x.cols(); ++f) {
    for (std::size_t m = 0; m < n; ++m) vals[m] = {x(idx[m], f), y[idx[m]]};
    std::sort(vals.begin(), vals.end());
    std::size_t left_n = 0, left_pos = 0;
    for (std::size_t m = 0; m + 1 < n; ++m) {
      ++left_n;
      left_pos += vals[m].second ? 1 : 0;
      if (vals[m].first == vals[m + 1].first) continue;
      const double thr = (vals[m].first + vals[m + 1].first) / 2.0;
      const std::size_t right_n = n - left_n;
      const std::size_t right_pos = pos - left_pos;
      const double child_gini =
          (static_cast<double>(left_n) * gini_of(left_pos, left_n) +
           static_cast<double>(right_n) * gini_of(right_pos, right_n)) /
          static_cast<double>(n);
      const double gain = parent_gini - child_gini;
      if (gain > best_gain + 1e-15) {
        best_gain = gain;
        best_feature = f;
        best_threshold = thr;
        found = true;
      }
    }
  }
  if (!found) {
    im.nodes.push_back(node);
    return static_cast<int>(im.nodes.size() - 1);
  }

  std::vector<std::size_t> left_idx, right_idx;
  for (const std::size_t i : idx)
    (x(i, best_feature) < best_threshold ? left_idx : right_idx).push_back(i);
  node.leaf = false;
  node.feature = best_feature;
  node.threshold = best_threshold;
  im.nodes.push_back(node);
  const int self = static_cast<int>(im.nodes.size() - 1);
  im.nodes[self].left = build_tree(im, x, y, left_idx, depth + 1);
  im.nodes[self].right = build_tree(im, x, y, right_idx, depth + 1);
  return self;
}

}  // namespace

double Classifier::Impl::score_one(ClassifierKind kind, const double* x) const {
  switch (kind) {
    case ClassifierKind::gaussian_nb: {
      double log_post[2];
      for (int c = 0; c < 2; ++c) {
        double ll = log_prior[c];
        for (std::size_t j = 0; j < width; ++j) {
          const double diff = x[j] - mean[c][j];
          ll += -0.5 * std::log(2.0 * 3.14159265358979323846 * var[c][j]) -
                diff * diff / (2.0 * var[c][j]);
        }
        log_post[c] = ll;
      }
      const double m = std::max(log_post[0], log_post[1]);
      const double e0 = std::exp(log_post[0] - m), e1 = std::exp(log_post[1] - m);
      return e1 / (e0 + e1);
    }
    case ClassifierKind::bernoulli_nb: {
      double log_post[2];
      for (int c = 0; c < 2; ++c) {
        double ll = log_prior[c];
        for (std::size_t j = 0; j < width; ++j)
          ll += x[j] > cfg.bernoulli_binarize ? log_rate1[c][j] : log_rate0[c][j];
        log_post[c] = ll;
      }
      const double m = std::max(log_post[0], log_post[1]);
      const double e0 = std::exp(log_post[0] - m), e1 = std::exp(log_post[1] - m);
      return e1 / (e0 + e1);
    }
    case ClassifierKind::knn: {
      // Partial sort of (distance, index) keeps neighbor selection stable.
      std::vector<std::pair<double, std::size_t>> dist(train_x.rows());
      for (std::size_t i = 0; i < train_x.rows(); ++i) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
          const double diff = train_x(i, j) - x[j];
          d2 += diff * diff;
        }
        dist[i] = {d2, i};
      }
      std::partial_sort(dist.begin(), dist.begin() + k_eff, dist.end());
      std::size_t pos = 0;
      for (int m = 0; m < k_eff; ++m) pos += train_y[dist[m].second] ? 1 : 0;
      return static_cast<double>(pos) / static_cast<double>(k_eff);
    }
    case ClassifierKind::logistic_regression: {
      double z = b;
      for (std::size_t j = 0; j < width; ++j) z += w[j] * x[j];
      return 1.0 / (1.0 + std::exp(-z));
    }
    case ClassifierKind::decision_tree: {
      int at = 0;
      while (!nodes[at].leaf) at = x[nodes[at].feature] < nodes[at].threshold ? nodes[at].left
                                                                              : nodes[at].right;
      return nodes[at].p_pos;
    }
  }
  return 0.0;
}

Classifier Classifier::fit(ClassifierKind kind, const nn::Matrix& x,
                           const std::vector<std::uint8_t>& y, const ClassifierConfig& cfg) {
  if (x.rows() != y.size()) throw std::invalid_argument("fit: row/label count mismatch");
  if (x.rows() < 2) throw std::invalid_argument("fit: need at least two rows");
  std::size_t pos = 0;
  for (const auto v : y) pos += v ? 1 : 0;
  if (pos == 0 || pos == y.size()) throw std::invalid_argument("fit: both classes must be present");

  auto impl = std::make_shared<Impl>();
  impl->cfg = cfg;
  impl->width = x.cols();
  switch (kind) {
    case ClassifierKind::gaussian_nb:
      fit_gaussian_nb(*impl, x, y);
      break;
    case ClassifierKind::bernoulli_nb:
      fit_bernoulli_nb(*impl, x, y);
      break;
    case ClassifierKind::knn:
      impl->train_x = x;
      impl->train_y = y;
      impl->k_eff = std::min<int>(cfg.knn_k, static_cast<int>(x.rows()));
      break;
    case ClassifierKind::logistic_regression:
      fit_logreg(*impl, x, y);
      break;
    case ClassifierKind::decision_tree: {
      std::vector<std::size_t> idx(x.rows());
      std::iota(idx.begin(), idx.end(), 0);
      build_tree(*impl, x, y, idx, 0);
      break;
    }
  }
  Classifier clf;
  clf.kind_ = kind;
  clf.impl_ = std::move(impl);
  return clf;
}

std::vector<double> Classifier::score(const nn::Matrix& x) const {
  if (!impl_) throw std::logic_error("score: classifier not fitted");
  if (x.cols() != impl_->width)
    throw std::invalid_argument("score: input width " + std::to_string(x.cols()) +
                                " does not match training width " + std::to_string(impl_->width));
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = impl_->score_one(kind_, x.row(i));
  return out;
}

std::vector<std::uint8_t> Classifier::predict(const nn::Matrix& x, double threshold) const {
  const std::vector<double> s = score(x);
  std::vector<std::uint8_t> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] >= threshold ? 1 : 0;
  return out;
}

}  // namespace semres::classify
