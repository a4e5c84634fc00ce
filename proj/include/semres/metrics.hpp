#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semres/matrix.hpp"

namespace semres::metrics {

// Positive = minority class throughout.
struct ConfusionMatrix {
  long tp = 0;
  long fn = 0;
  long fp = 0;
  long tn = 0;
};

ConfusionMatrix confusion(std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred);

// 2PR/(P+R); defined as 0 when tp = 0.
double f1(const ConfusionMatrix& cm);

// sqrt(TPR * TNR). Requires both classes present.
double g_mean(const ConfusionMatrix& cm);

// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
// ties counting one half. Rank-sum evaluation; requires both classes.
double auc(std::span<const double> scores, std::span<const std::uint8_t> y_true);

// 10*log10(1/MSE) over all entries, for matrices living in the normalized
// [0,1] domain (MAX = 1). Returns +infinity when the matrices are identical.
double psnr(const nn::Matrix& reference, const nn::Matrix& test);

// Sample Pearson correlation; requires length >= 2 and nonzero variances.
double pearson(std::span<const double> a, std::span<const double> b);

// Correlation between two empirical distributions: both samples are sorted
// and linearly resampled to a common quantile grid, then correlated.
double quantile_matched_pearson(std::span<const double> a, std::span<const double> b);

// Kolmogorov-style sup distance between two empirical CDFs.
double ecdf_distance(std::span<const double> a, std::span<const double> b);

// Per-dataset ranks over a N-datasets x k-methods metric matrix. The best
// value of a row receives rank k ("higher ranking is better" orientation);
// ties share the average rank.
struct RankTable {
  std::size_t n_datasets = 0;
  std::size_t n_methods = 0;
  std::vector<std::vector<double>> ranks;  // per dataset
  std::vector<double> mean_ranks;          // per method
};

RankTable mean_ranks(const std::vector<std::vector<double>>& metric_matrix, bool higher_better = true);

struct FriedmanResult {
  double chi2 = 0.0;
  double p_value = 1.0;
};

// Friedman chi-square over the table's mean ranks, df = k - 1. Needs at
// least 2 datasets and 3 methods.
FriedmanResult friedman(const RankTable& table);

// Upper tail of the chi-square distribution: Q(df/2, x/2) via regularized
// incomplete gamma (series / continued fraction), absolute error < 1e-10.
double chi2_survival(double x, double df);

// Nemenyi critical difference q_alpha * sqrt(k(k+1)/(6N)); alpha = 0.05 with
// embedded constants for k = 2..10.
double nemenyi_cd(std::size_t k, std::size_t n_datasets, double alpha = 0.05);

}  // namespace semres::metrics
