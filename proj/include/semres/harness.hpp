#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "semres/dataio.hpp"
#include "semres/metrics.hpp"
#include "semres/oversamplers.hpp"
#include "semres/trainer.hpp"

namespace semres::harness {

// Resolved experiment configuration; serializes to/from the manifest JSON so
// re-running a manifest reproduces a run exactly.
struct ExperimentConfig {
  std::vector<std::string> datasets;  // file paths (.dat KEEL, .csv otherwise)
  std::vector<std::string> methods = {"none", "smote", "adasyn", "semres_ddpm", "mlp_ddpm"};
  std::vector<std::string> classifiers = {"gaussian_nb", "bernoulli_nb", "knn",
                                          "logistic_regression", "decision_tree"};
  int folds = 10;
  std::uint64_t seed = 17;

  // Diffusion-model knobs shared by the ddpm methods and the benches.
  int T = 1000;
  int iterations = 20000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int d_hidden = 128;
  int n_blocks = 2;
  int n_tokens = 8;
  int n_heads = 2;
  std::string threshold_mode = "subtract";  // or "shrinkage"
  std::vector<int> mlp_hidden = {128, 128};
  double lr = 1e-3;
  int batch_size = 0;

  int smote_k = 5;
  int adasyn_k = 5;

  int tprime = -1;  // denoise-bench start step; -1 follows T, 0 skips noising
  int jobs = 1;
  std::string csv_positive_label;  // required for csv datasets
  std::string out_dir;

  // CI-sized settings: T=100, 3000 iterations, a steeper beta ramp reaching
  // the same terminal signal level as the full schedule, and a slimmer
  // denoiser.
  void apply_desk_scale();

  trainer::TrainConfig train_config(trainer::Arch arch) const;

  std::string to_json_string() const;
  static ExperimentConfig from_json_string(const std::string& text);
};

struct ResultRecord {
  std::string dataset;
  std::string method;
  std::string classifier;
  int fold = 0;
  std::string metric;
  double value = 0.0;
};

struct CellError {
  std::string dataset;
  std::string method;
  int fold = 0;
  std::string message;
};

struct AggregateRecord {
  std::string dataset;
  std::string method;
  std::string classifier;
  std::string metric;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over folds
  int folds = 0;
};

struct ResultTable {
  std::vector<ResultRecord> records;
  std::vector<CellError> errors;
  std::vector<std::string> warnings;

  std::vector<AggregateRecord> aggregates() const;
  std::string to_csv() const;
  static ResultTable from_csv(const std::string& text);

  // Mean of a metric over classifiers and folds per (dataset, method).
  double mean_metric(const std::string& dataset, const std::string& method,
                     const std::string& metric) const;
};

dataio::Dataset load_dataset(const std::string& path, const std::string& csv_positive_label = "");

// The cross-validation protocol: per (dataset, fold, method) the training
// split is balanced, every classifier is fitted on the balanced encoded set
// and scored on the untouched test fold; F1 / G-mean / AUC are recorded.
// Cells that fail are reported in `errors` and the run continues. With
// out_dir set, writes results.csv, aggregates.csv, manifest.json and
// summary.json.
ResultTable run_evaluate(const ExperimentConfig& config);

struct DenoiseBenchEntry {
  std::string dataset;
  double psnr_mlp = 0.0;
  double psnr_semst = 0.0;
};

// Paired reconstruction benchmark: each dataset's minority matrix is noised
// to the start step with a seeded draw and reconstructed by the full reverse
// chain of both denoisers, sharing one noise stream so the comparison is
// like for like. Trains both models with equal budgets (or reuses the given
// checkpoints when provided via bench_pair).
std::vector<DenoiseBenchEntry> run_denoise_bench(const ExperimentConfig& config);

DenoiseBenchEntry bench_pair(const std::string& dataset_name, const nn::Matrix& minority,
                             const trainer::Checkpoint& mlp_ckpt,
                             const trainer::Checkpoint& semst_ckpt, int tprime, std::uint64_t seed,
                             const std::filesystem::path& scatter_csv = {});

struct DistCompareEntry {
  std::string dataset;
  std::vector<std::string> feature_names;     // encoded numeric columns
  std::vector<double> pearson_per_feature;    // quantile-matched
  double pearson_two_feature_mean = 0.0;      // over the two highest-variance features
  std::vector<double> ecdf_distance_per_feature;
};

// Generates one synthetic row per real minority row and compares marginal
// distributions (32-bin histograms, empirical CDFs, quantile-matched
// correlation). Exports plot-ready CSVs when out_dir is set.
std::vector<DistCompareEntry> run_dist_compare(const ExperimentConfig& config);

struct StatsReport {
  std::vector<std::string> methods;
  std::vector<double> mean_rank;
  double chi2 = 0.0;
  double p_value = 1.0;
  double critical_difference = 0.0;
  bool significant = false;
  // [mean_rank - CD/2, mean_rank + CD/2] per method
  std::vector<std::pair<double, double>> intervals;

  std::string to_json_string() const;
};

// Friedman + Nemenyi over a datasets x methods metric matrix (higher =
// better orientation).
StatsReport run_stats(const std::vector<std::string>& methods,
                      const std::vector<std::vector<double>>& matrix, double alpha = 0.05);

// Wide-form matrix CSV: header `dataset,<method>,...`, one row per dataset.
struct MetricMatrix {
  std::vector<std::string> datasets;
  std::vector<std::string> methods;
  std::vector<std::vector<double>> values;
};

MetricMatrix metric_matrix_from_csv(const std::string& text);

// Collapses a long-form result table to a matrix for one metric, averaging
// over classifiers and folds. Throws if any (dataset, method) cell is empty,
// listing the missing cells.
MetricMatrix metric_matrix_from_results(const ResultTable& table, const std::string& metric);

// Deterministic formatting used by every CSV export.
std::string format_value(double v);

}  // namespace semres::harness
