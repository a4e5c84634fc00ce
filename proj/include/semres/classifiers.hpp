#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "semres/matrix.hpp"

namespace semres::classify {

enum class ClassifierKind {
  gaussian_nb,
  bernoulli_nb,
  knn,
  logistic_regression,
  decision_tree,
};

std::string kind_name(ClassifierKind k);
ClassifierKind kind_from_name(const std::string& name);
const std::vector<ClassifierKind>& all_kinds();

struct ClassifierConfig {
  int knn_k = 5;
  double logreg_lr = 0.1;
  int logreg_iters = 500;
  double logreg_l2 = 1e-4;
  int tree_max_depth = 10;
  int tree_min_split = 2;
  double bernoulli_binarize = 0.5;
  double bernoulli_laplace = 1.0;
  double gnb_var_smoothing = 1e-9;
};

// A fitted binary classifier with a positive-class scoring interface.
// Immutable after fit; fitting is deterministic (tree split ties break by
// lowest feature index, then lowest threshold).
class Classifier {
 public:
  static Classifier fit(ClassifierKind kind, const nn::Matrix& x,
                        const std::vector<std::uint8_t>& y, const ClassifierConfig& cfg = {});

  // Positive-class scores in [0,1].
  std::vector<double> score(const nn::Matrix& x) const;

  // label = score >= threshold
  std::vector<std::uint8_t> predict(const nn::Matrix& x, double threshold = 0.5) const;

  ClassifierKind kind() const { return kind_; }

  struct Impl;

 private:
  ClassifierKind kind_ = ClassifierKind::gaussian_nb;
  std::shared_ptr<const Impl> impl_;
};

}  // namespace semres::classify
