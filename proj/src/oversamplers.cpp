#include "semres/oversamplers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "semres/diffusion.hpp"
#include "semres/rng.hpp"

namespace semres::oversample {

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {"none", "smote", "adasyn", "semres_ddpm",
                                                 "mlp_ddpm"};
  return names;
}

bool is_ddpm_method(const std::string& method) {
  return method == "semres_ddpm" || method == "mlp_ddpm";
}

namespace {

// Indices of the k nearest rows to `query` (Euclidean), excluding `exclude`;
// ties resolve by row index.
std::vector<std::size_t> nearest_rows(const nn::Matrix& x, std::size_t query, int k,
                                      std::optional<std::size_t> exclude,
                                      const std::vector<std::size_t>* candidates = nullptr) {
  std::vector<std::pair<double, std::size_t>> dist;
  const auto consider = [&](std::size_t i) {
    if (exclude && i == *exclude) return;
    double d2 = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double diff = x(i, j) - x(query, j);
      d2 += diff * diff;
    }
    dist.emplace_back(d2, i);
  };
  if (candidates) {
    for (const std::size_t i : *candidates) consider(i);
  } else {
    for (std::size_t i = 0; i < x.rows(); ++i) consider(i);
  }
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
  std::vector<std::size_t> out(kk);
  for (std::size_t m = 0; m < kk; ++m) out[m] = dist[m].second;
  return out;
}

}  // namespace

nn::Matrix smote(const nn::Matrix& minority, int k, std::size_t count, std::uint64_t seed,
                 SmoteProvenance* provenance) {
  const std::size_t n = minority.rows();
  if (n < 2) throw std::invalid_argument("smote: need at least two minority rows");
  const int k_eff = std::min<int>(k, static_cast<int>(n) - 1);

  // Neighbor lists are precomputed; they are what the interpolation draws from.
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t i = 0; i < n; ++i) neighbors[i] = nearest_rows(minority, i, k_eff, i);

  Rng rng(Rng::derive(seed, "smote"));
  nn::Matrix out(count, minority.cols());
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t base = rng.index(n);
    const std::size_t nn_idx = neighbors[base][rng.index(neighbors[base].size())];
    const double lambda = rng.uniform();
    for (std::size_t j = 0; j < minority.cols(); ++j)
      out(s, j) = minority(base, j) + lambda * (minority(nn_idx, j) - minority(base, j));
    if (provenance) {
      provenance->base.push_back(base);
      provenance->neighbor.push_back(nn_idx);
      provenance->lambda.push_back(lambda);
    }
  }
  return out;
}

nn::Matrix adasyn(const nn::Matrix& train_x, const std::vector<std::uint8_t>& train_y, int k,
                  std::size_t count, std::uint64_t seed, bool* uniform_fallback,
                  std::vector<std::size_t>* allocations) {
  if (train_x.rows() != train_y.size()) throw std::invalid_argument("adasyn: row/label mismatch");
  std::vector<std::size_t> minority_idx;
  for (std::size_t i = 0; i < train_y.size(); ++i)
    if (train_y[i]) minority_idx.push_back(i);
  const std::size_t n_min = minority_idx.size();
  if (n_min < 2) throw std::invalid_argument("adasyn: need at least two minority rows");

  // Majority share of each minority row's neighborhood in the full split.
  std::vector<double> r(n_min, 0.0);
  double r_sum = 0.0;
  for (std::size_t m = 0; m < n_min; ++m) {
    const std::vector<std::size_t> near = nearest_rows(train_x, minority_idx[m], k, minority_idx[m]);
    std::size_t majority = 0;
    for (const std::size_t i : near) majority += train_y[i] ? 0 : 1;
    r[m] = near.empty() ? 0.0 : static_cast<double>(majority) / static_cast<double>(near.size());
    r_sum += r[m];
  }
  bool fallback = r_sum == 0.0;
  if (uniform_fallback) *uniform_fallback = fallback;
  if (fallback)
    for (double& v : r) v = 1.0;
  r_sum = std::accumulate(r.begin(), r.end(), 0.0);

  // Largest-remainder allocation of `count` synthetic rows.
  std::vector<std::size_t> alloc(n_min, 0);
  std::vector<std::pair<double, std::size_t>> remainders(n_min);
  std::size_t assigned = 0;
  for (std::size_t m = 0; m < n_min; ++m) {
    const double share = static_cast<double>(count) * r[m] / r_sum;
    alloc[m] = static_cast<std::size_t>(share);
    assigned += alloc[m];
    remainders[m] = {-(share - static_cast<double>(alloc[m])), m};  // descending remainder
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t m = 0; assigned < count && m < n_min; ++m, ++assigned)
    alloc[remainders[m].second]++;
  if (allocations) *allocations = alloc;

  // Interpolate inside the minority class, as smote does.
  const int k_min = std::min<int>(k, static_cast<int>(n_min) - 1);
  std::vector<std::vector<std::size_t>> min_neighbors(n_min);
  for (std::size_t m = 0; m < n_min; ++m)
    min_neighbors[m] = nearest_rows(train_x, minority_idx[m], k_min, minority_idx[m], &minority_idx);

  Rng rng(Rng::derive(seed, "adasyn"));
  nn::Matrix out(count, train_x.cols());
  std::size_t row = 0;
  for (std::size_t m = 0; m < n_min; ++m) {
    for (std::size_t s = 0; s < alloc[m]; ++s, ++row) {
      const std::size_t base = minority_idx[m];
      const std::size_t nn_idx = min_neighbors[m][rng.index(min_neighbors[m].size())];
      const double lambda = rng.uniform();
      for (std::size_t j = 0; j < train_x.cols(); ++j)
        out(row, j) = train_x(base, j) + lambda * (train_x(nn_idx, j) - train_x(base, j));
    }
  }
  return out;
}

namespace {

using Synthesizer = std::function<nn::Matrix(BalancedTrainSet&, std::size_t)>;

BalancedTrainSet balance_with(const OversampleRequest& req, const Synthesizer& make_synthetic) {
  const dataio::Dataset& ds = *req.data;
  std::vector<dataio::Row> minority_rows;
  std::vector<std::size_t> order = req.train_idx;
  for (const std::size_t i : order)
    if (ds.labels[i]) minority_rows.push_back(ds.rows[i]);
  if (minority_rows.empty()) throw std::invalid_argument("balance: no minority rows in the split");

  BalancedTrainSet out;
  auto [encoded_min, norm] = dataio::fit_encode(minority_rows, ds.schema);
  (void)encoded_min;
  out.normalizer = std::move(norm);

  std::vector<dataio::Row> train_rows;
  train_rows.reserve(order.size());
  for (const std::size_t i : order) train_rows.push_back(ds.rows[i]);
  const dataio::EncodedMatrix encoded_train = dataio::encode(train_rows, out.normalizer);

  out.x = encoded_train.values;
  out.rows = std::move(train_rows);
  out.n_original = order.size();
  for (const std::size_t i : order) {
    out.y.push_back(ds.labels[i]);
    out.synthetic.push_back(0);
  }

  std::size_t n_min = 0, n_maj = 0;
  for (const std::size_t i : order) (ds.labels[i] ? n_min : n_maj)++;
  if (n_min > n_maj) throw std::invalid_argument("balance: minority class outnumbers majority");
  const std::size_t deficit = n_maj - n_min;
  if (deficit == 0 || !make_synthetic) return out;

  const nn::Matrix synth = make_synthetic(out, deficit);
  const std::vector<dataio::Row> synth_rows = dataio::decode(synth, out.normalizer);
  nn::Matrix all(out.x.rows() + synth.rows(), out.x.cols());
  all.set_rows(0, out.x);
  all.set_rows(out.x.rows(), synth);
  out.x = std::move(all);
  for (std::size_t s = 0; s < synth.rows(); ++s) {
    out.y.push_back(1);
    out.synthetic.push_back(1);
    out.rows.push_back(synth_rows[s]);
  }
  return out;
}

nn::Matrix minority_block(const BalancedTrainSet& set) {
  std::size_t n_min = 0;
  for (std::size_t i = 0; i < set.n_original; ++i) n_min += set.y[i] ? 1 : 0;
  nn::Matrix m(n_min, set.x.cols());
  std::size_t r = 0;
  for (std::size_t i = 0; i < set.n_original; ++i) {
    if (!set.y[i]) continue;
    for (std::size_t j = 0; j < set.x.cols(); ++j) m(r, j) = set.x(i, j);
    ++r;
  }
  return m;
}

}  // namespace

BalancedTrainSet semres_oversample(const OversampleRequest& request) {
  return balance_with(request, [&](BalancedTrainSet& set, std::size_t count) {
    nn::Matrix minority = minority_block(set);
    trainer::TrainConfig cfg = request.diffusion;
    cfg.arch = request.method == "mlp_ddpm" ? trainer::Arch::mlp : trainer::Arch::semst;
    cfg.seed = Rng::derive(request.seed, "oversample-train");
    const trainer::TrainResult trained = trainer::train(minority, cfg, set.normalizer,
                                                        dataio::schema_fingerprint(request.data->schema),
                                                        &set.warnings);
    std::unique_ptr<denoise::Denoiser> den = trainer::instantiate(trained.checkpoint);
    Rng rng(Rng::derive(request.seed, "oversample-sample"));
    nn::Matrix synth = diffusion::sample(*den, count, minority.cols(), trained.checkpoint.schedule(), rng);
    for (std::size_t i = 0; i < synth.rows(); ++i)
      for (std::size_t j = 0; j < synth.cols(); ++j)
        synth(i, j) = std::clamp(synth(i, j), 0.0, 1.0);
    return synth;
  });
}

BalancedTrainSet balance(const OversampleRequest& request) {
  if (!request.data) throw std::invalid_argument("balance: no dataset");
  const std::string& m = request.method;
  if (m == "none") return balance_with(request, nullptr);
  if (m == "smote") {
    return balance_with(request, [&](BalancedTrainSet& set, std::size_t count) {
      return smote(minority_block(set), request.smote_k, count,
                   Rng::derive(request.seed, "balance-smote"));
    });
  }
  if (m == "adasyn") {
    return balance_with(request, [&](BalancedTrainSet& set, std::size_t count) {
      nn::Matrix original(set.n_original, set.x.cols());
      for (std::size_t i = 0; i < set.n_original; ++i)
        for (std::size_t j = 0; j < set.x.cols(); ++j) original(i, j) = set.x(i, j);
      std::vector<std::uint8_t> y(set.y.begin(), set.y.begin() + static_cast<std::ptrdiff_t>(set.n_original));
      bool fallback = false;
      nn::Matrix synth = adasyn(original, y, request.adasyn_k, count,
                                Rng::derive(request.seed, "balance-adasyn"), &fallback);
      if (fallback) set.warnings.push_back("adasyn: no boundary minority rows; uniform allocation used");
      return synth;
    });
  }
  if (is_ddpm_method(m)) return semres_oversample(request);
  throw std::invalid_argument("balance: unknown method '" + m + "'");
}

}  // namespace semres::oversample
