#include "semres/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace semres::metrics {

ConfusionMatrix confusion(std::span<const std::uint8_t> y_true, std::span<const std::uint8_t> y_pred) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("confusion: length mismatch");
  if (y_true.empty()) throw std::invalid_argument("confusion: empty input");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i]) {
      (y_pred[i] ? cm.tp : cm.fn)++;
    } else {
      (y_pred[i] ? cm.fp : cm.tn)++;
    }
  }
  return cm;
}

double f1(const ConfusionMatrix& cm) {
  if (cm.tp == 0) return 0.0;
  const double p = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  const double r = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  return 2.0 * p * r / (p + r);
}

double g_mean(const ConfusionMatrix& cm) {
  if (cm.tp + cm.fn == 0 || cm.tn + cm.fp == 0)
    throw std::invalid_argument("g_mean: both classes must be present");
  const double tpr = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  const double tnr = static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp);
  return std::sqrt(tpr * tnr);
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> y_true) {
  if (scores.size() != y_true.size()) throw std::invalid_argument("auc: length mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (const auto y : y_true) n_pos += y ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auc: both classes must be present");

  // Rank-sum with average ranks for ties.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = static_cast<double>(i + j) / 2.0 + 1.0;
    for (std::size_t m = i; m <= j; ++m)
      if (y_true[order[m]]) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double psnr(const nn::Matrix& reference, const nn::Matrix& test) {
  if (!reference.same_shape(test)) throw std::invalid_argument("psnr: shape mismatch");
  if (reference.size() == 0) throw std::invalid_argument("psnr: empty input");
  double mse = 0.0;
  for (std::size_t r = 0; r < reference.rows(); ++r)
    for (std::size_t c = 0; c < reference.cols(); ++c) {
      const double d = reference(r, c) - test(r, c);
      mse += d * d;
    }
  mse /= static_cast<double>(reference.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) throw std::invalid_argument("pearson: need at least two points");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) throw std::invalid_argument("pearson: zero variance input");
  return cov / std::sqrt(va * vb);
}

namespace {

// Linear interpolation of the order statistics at quantile q in [0,1].
double sample_quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

double quantile_matched_pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("quantile_matched_pearson: need at least two points per side");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const std::size_t n = std::max(sa.size(), sb.size());
  std::vector<double> qa(n), qb(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double q = static_cast<double>(i) / static_cast<double>(n - 1);
    qa[i] = sample_quantile(sa, q);
    qb[i] = sample_quantile(sb, q);
  }
  return pearson(qa, qb);
}

double ecdf_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ecdf_distance: empty sample");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double sup = 0.0;
  std::size_t ia = 0, ib = 0;
  while (ia < sa.size() && ib < sb.size()) {
    const double x = std::min(sa[ia], sb[ib]);
    while (ia < sa.size() && sa[ia] <= x) ++ia;
    while (ib < sb.size() && sb[ib] <= x) ++ib;
    const double fa = static_cast<double>(ia) / static_cast<double>(sa.size());
    const double fb = static_cast<double>(ib) / static_cast<double>(sb.size());
    sup = std::max(sup, std::abs(fa - fb));
  }
  return sup;
}

RankTable mean_ranks(const std::vector<std::vector<double>>& metric_matrix, bool higher_better) {
  if (metric_matrix.empty()) throw std::invalid_argument("mean_ranks: empty matrix");
  const std::size_t k = metric_matrix.front().size();
  if (k == 0) throw std::invalid_argument("mean_ranks: zero methods");

  RankTable table;
  table.n_datasets = metric_matrix.size();
  table.n_methods = k;
  table.mean_ranks.assign(k, 0.0);
  for (const auto& row : metric_matrix) {
    if (row.size() != k) throw std::invalid_argument("mean_ranks: ragged matrix");
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    // Ascending puts the best value last when higher is better, so position
    // ranks 1..k directly give the paper's orientation (best = k).
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return higher_better ? row[a] < row[b] : row[a] > row[b];
    });
    std::vector<double> ranks(k, 0.0);
    std::size_t i = 0;
    while (i < k) {
      std::size_t j = i;
      while (j + 1 < k && row[order[j + 1]] == row[order[i]]) ++j;
      const double avg = static_cast<double>(i + j) / 2.0 + 1.0;
      for (std::size_t m = i; m <= j; ++m) ranks[order[m]] = avg;
      i = j + 1;
    }
    for (std::size_t m = 0; m < k; ++m) table.mean_ranks[m] += ranks[m];
    table.ranks.push_back(std::move(ranks));
  }
  for (double& r : table.mean_ranks) r /= static_cast<double>(table.n_datasets);
  return table;
}

FriedmanResult friedman(const RankTable& table) {
  const double n = static_cast<double>(table.n_datasets);
  const double k = static_cast<double>(table.n_methods);
  if (table.n_datasets < 2) throw std::invalid_argument("friedman: need at least 2 datasets");
  if (table.n_methods < 3) throw std::invalid_argument("friedman: need at least 3 methods");
  double sum_sq = 0.0;
  for (const double r : table.mean_ranks) sum_sq += r * r;
  FriedmanResult res;
  res.chi2 = 12.0 * n / (k * (k + 1.0)) * (sum_sq - k * (k + 1.0) * (k + 1.0) / 4.0);
  if (res.chi2 < 0.0 && res.chi2 > -1e-9) res.chi2 = 0.0;  // rounding guard
  res.p_value = chi2_survival(res.chi2, k - 1.0);
  return res;
}

namespace {

// Regularized incomplete gamma, lower (P) by series, upper (Q) by Lentz
// continued fraction. Follows the classic numerical recipes construction.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 1000; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double chi2_survival(double x, double df) {
  if (x < 0.0) throw std::invalid_argument("chi2_survival: x must be nonnegative");
  if (df < 1.0) throw std::invalid_argument("chi2_survival: df must be at least 1");
  const double a = df / 2.0;
  const double xx = x / 2.0;
  if (xx == 0.0) return 1.0;
  if (xx < a + 1.0) return 1.0 - gamma_p_series(a, xx);
  return gamma_q_contfrac(a, xx);
}

double nemenyi_cd(std::size_t k, std::size_t n_datasets, double alpha) {
  // Studentized range q_{0.05,k,inf} / sqrt(2) for k = 2..10.
  static constexpr double q05[] = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164};
  if (std::abs(alpha - 0.05) > 1e-12)
    throw std::invalid_argument("nemenyi_cd: only alpha = 0.05 is tabulated");
  if (k < 2 || k > 10)
    throw std::invalid_argument("nemenyi_cd: k outside the tabulated range 2..10");
  if (n_datasets == 0) throw std::invalid_argument("nemenyi_cd: need at least one dataset");
  const double kd = static_cast<double>(k);
  return q05[k - 2] * std::sqrt(kd * (kd + 1.0) / (6.0 * static_cast<double>(n_datasets)));
}

}  // namespace semres::metrics
