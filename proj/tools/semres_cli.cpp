// Command-line front end: ingest, train, sample, oversample, evaluate,
// denoise-bench, dist-compare, stats.
//
// Exit codes: 0 success, 1 partial per-cell failure, 2 configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "semres/datagen.hpp"
#include "semres/diffusion.hpp"
#include "semres/harness.hpp"
#include "semres/oversamplers.hpp"

namespace {

using nlohmann::json;
using namespace semres;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spill(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

struct CommonOpts {
  std::string config_path;
  harness::ExperimentConfig cfg;
  bool desk = false;
};

// Registers the flags shared by the experiment-style subcommands. Flag
// values override whatever the config file set.
void add_experiment_flags(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config (or a manifest from a previous run)");
  cmd->add_option("--data", opts.cfg.datasets, "dataset files (.dat KEEL or .csv)");
  cmd->add_option("--methods", opts.cfg.methods, "oversampling methods");
  cmd->add_option("--classifiers", opts.cfg.classifiers, "classifier kinds");
  cmd->add_option("--folds", opts.cfg.folds, "cross-validation folds");
  cmd->add_option("--seed", opts.cfg.seed, "master seed");
  cmd->add_option("--T", opts.cfg.T, "diffusion steps");
  cmd->add_option("--iterations", opts.cfg.iterations, "training iterations");
  cmd->add_option("--beta-start", opts.cfg.beta_start, "first beta of the linear schedule");
  cmd->add_option("--beta-end", opts.cfg.beta_end, "last beta of the linear schedule");
  cmd->add_option("--d-hidden", opts.cfg.d_hidden, "denoiser hidden width");
  cmd->add_option("--n-blocks", opts.cfg.n_blocks, "residual blocks");
  cmd->add_option("--n-tokens", opts.cfg.n_tokens, "attention tokens per sample");
  cmd->add_option("--n-heads", opts.cfg.n_heads, "attention heads");
  cmd->add_option("--threshold-mode", opts.cfg.threshold_mode,
                  "attention threshold form: subtract or shrinkage");
  cmd->add_option("--mlp-hidden", opts.cfg.mlp_hidden, "mlp hidden widths");
  cmd->add_option("--lr", opts.cfg.lr, "learning rate");
  cmd->add_option("--batch", opts.cfg.batch_size, "batch size (0 = min(64, n))");
  cmd->add_option("--smote-k", opts.cfg.smote_k, "smote neighbors");
  cmd->add_option("--adasyn-k", opts.cfg.adasyn_k, "adasyn neighbors");
  cmd->add_option("--tprime", opts.cfg.tprime, "denoise-bench start step (-1 = T)");
  cmd->add_option("--jobs", opts.cfg.jobs, "parallel work units");
  cmd->add_option("--positive", opts.cfg.csv_positive_label, "positive label for csv datasets");
  cmd->add_option("--out", opts.cfg.out_dir, "output directory");
  cmd->add_flag("--desk", opts.desk, "desk-scale preset (T=100, 3000 iterations, faster lr)");
}

// Config file first, desk preset second, explicit flags last.
harness::ExperimentConfig resolve(const CLI::App* cmd, CommonOpts& opts) {
  harness::ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = harness::ExperimentConfig::from_json_string(slurp(opts.config_path));
  if (opts.desk) cfg.apply_desk_scale();
  const auto take = [&](const std::string& flag, auto member) {
    if (cmd->count(flag) > 0) cfg.*member = opts.cfg.*member;
  };
  take("--data", &harness::ExperimentConfig::datasets);
  take("--methods", &harness::ExperimentConfig::methods);
  take("--classifiers", &harness::ExperimentConfig::classifiers);
  take("--folds", &harness::ExperimentConfig::folds);
  take("--seed", &harness::ExperimentConfig::seed);
  take("--T", &harness::ExperimentConfig::T);
  take("--iterations", &harness::ExperimentConfig::iterations);
  take("--beta-start", &harness::ExperimentConfig::beta_start);
  take("--beta-end", &harness::ExperimentConfig::beta_end);
  take("--d-hidden", &harness::ExperimentConfig::d_hidden);
  take("--n-blocks", &harness::ExperimentConfig::n_blocks);
  take("--n-tokens", &harness::ExperimentConfig::n_tokens);
  take("--n-heads", &harness::ExperimentConfig::n_heads);
  take("--threshold-mode", &harness::ExperimentConfig::threshold_mode);
  take("--mlp-hidden", &harness::ExperimentConfig::mlp_hidden);
  take("--lr", &harness::ExperimentConfig::lr);
  take("--batch", &harness::ExperimentConfig::batch_size);
  take("--smote-k", &harness::ExperimentConfig::smote_k);
  take("--adasyn-k", &harness::ExperimentConfig::adasyn_k);
  take("--tprime", &harness::ExperimentConfig::tprime);
  take("--jobs", &harness::ExperimentConfig::jobs);
  take("--positive", &harness::ExperimentConfig::csv_positive_label);
  take("--out", &harness::ExperimentConfig::out_dir);
  return cfg;
}

int cmd_ingest(const std::string& path, const std::string& positive, const std::string& out) {
  const dataio::Dataset ds = harness::load_dataset(path, positive);
  const dataio::ClassStats st = dataio::class_stats(ds);
  json j;
  j["dataset"] = std::filesystem::path(path).stem().string();
  j["rows"] = ds.n_rows();
  j["features"] = ds.n_features();
  j["minority"] = st.n_min;
  j["majority"] = st.n_maj;
  j["imbalance_ratio"] = st.imbalance_ratio;
  j["positive_label"] = ds.positive_label;
  j["negative_label"] = ds.negative_label;
  json schema = json::array();
  for (const dataio::FeatureSpec& f : ds.schema) {
    json jf;
    jf["name"] = f.name;
    jf["kind"] = f.kind == dataio::FeatureKind::numeric ? "numeric" : "categorical";
    if (f.kind == dataio::FeatureKind::categorical) jf["categories"] = f.categories;
    schema.push_back(std::move(jf));
  }
  j["schema"] = std::move(schema);
  const std::string text = j.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    spill(out, text);
  }
  return 0;
}

int cmd_train(const harness::ExperimentConfig& cfg, const std::string& arch_name,
              const std::string& out_dir) {
  if (cfg.datasets.size() != 1) throw CLI::ValidationError("train", "exactly one --data file required");
  const dataio::Dataset ds = harness::load_dataset(cfg.datasets[0], cfg.csv_positive_label);
  std::vector<dataio::Row> minority_rows;
  for (std::size_t i = 0; i < ds.n_rows(); ++i)
    if (ds.labels[i]) minority_rows.push_back(ds.rows[i]);
  auto [encoded, norm] = dataio::fit_encode(minority_rows, ds.schema);

  trainer::TrainConfig tc = cfg.train_config(trainer::arch_from_name(arch_name));
  std::vector<std::string> warnings;
  const trainer::TrainResult run =
      trainer::train(encoded.values, tc, norm, dataio::schema_fingerprint(ds.schema), &warnings);
  trainer::save(run.checkpoint, out_dir);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "trained " << arch_name << " on " << minority_rows.size() << " minority rows ("
            << run.steps << " steps), final smoothed loss "
            << harness::format_value(run.checkpoint.final_loss) << "\n"
            << "checkpoint written to " << out_dir << "\n";
  return 0;
}

int cmd_sample(const std::string& ckpt_dir, std::size_t n, std::uint64_t seed,
               const std::string& out) {
  const trainer::Checkpoint ckpt = trainer::load(ckpt_dir);
  std::unique_ptr<denoise::Denoiser> den = trainer::instantiate(ckpt);
  Rng rng(Rng::derive(seed, "cli-sample"));
  nn::Matrix synth = diffusion::sample(*den, n, static_cast<std::size_t>(ckpt.d_in()),
                                       ckpt.schedule(), rng);
  for (std::size_t i = 0; i < synth.rows(); ++i)
    for (std::size_t j = 0; j < synth.cols(); ++j) synth(i, j) = std::clamp(synth(i, j), 0.0, 1.0);
  if (ckpt.normalizer.empty()) throw std::runtime_error("checkpoint carries no normalizer; cannot decode");
  const std::vector<dataio::Row> rows = dataio::decode(synth, ckpt.normalizer);

  std::string csv;
  for (std::size_t f = 0; f < ckpt.normalizer.features.size(); ++f) {
    if (f) csv += ",";
    csv += ckpt.normalizer.features[f].name;
  }
  csv += "\n";
  for (const dataio::Row& row : rows) {
    const std::vector<std::string> cells = dataio::format_row(ckpt.normalizer.features, row);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) csv += ",";
      csv += cells[c];
    }
    csv += "\n";
  }
  if (out.empty()) {
    std::cout << csv;
  } else {
    spill(out, csv);
    std::cout << "wrote " << rows.size() << " rows to " << out << "\n";
  }
  return 0;
}

int cmd_oversample(const harness::ExperimentConfig& cfg, const std::string& method,
                   const std::string& out) {
  if (cfg.datasets.size() != 1)
    throw CLI::ValidationError("oversample", "exactly one --data file required");
  const dataio::Dataset ds = harness::load_dataset(cfg.datasets[0], cfg.csv_positive_label);

  oversample::OversampleRequest req;
  req.data = &ds;
  req.train_idx.resize(ds.n_rows());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) req.train_idx[i] = i;
  req.method = method;
  req.seed = cfg.seed;
  req.smote_k = cfg.smote_k;
  req.adasyn_k = cfg.adasyn_k;
  req.diffusion =
      cfg.train_config(method == "mlp_ddpm" ? trainer::Arch::mlp : trainer::Arch::semst);
  const oversample::BalancedTrainSet balanced = oversample::balance(req);
  for (const std::string& w : balanced.warnings) std::cerr << "warning: " << w << "\n";

  std::string csv;
  for (const dataio::FeatureSpec& f : ds.schema) csv += f.name + ",";
  csv += "class,synthetic\n";
  for (std::size_t i = 0; i < balanced.rows.size(); ++i) {
    const std::vector<std::string> cells = dataio::format_row(ds.schema, balanced.rows[i]);
    for (const std::string& c : cells) csv += c + ",";
    csv += (balanced.y[i] ? ds.positive_label : ds.negative_label);
    csv += balanced.synthetic[i] ? ",1\n" : ",0\n";
  }
  if (out.empty()) {
    std::cout << csv;
  } else {
    spill(out, csv);
    std::cout << "wrote " << balanced.rows.size() << " rows (" << balanced.rows.size() - balanced.n_original
              << " synthetic) to " << out << "\n";
  }
  return 0;
}

int cmd_stats(const std::string& matrix_path, const std::string& results_path,
              const std::string& metric, double alpha, const std::string& out_dir) {
  harness::MetricMatrix mm;
  if (!matrix_path.empty()) {
    mm = harness::metric_matrix_from_csv(slurp(matrix_path));
  } else if (!results_path.empty()) {
    mm = harness::metric_matrix_from_results(harness::ResultTable::from_csv(slurp(results_path)),
                                             metric);
  } else {
    throw CLI::ValidationError("stats", "either --matrix or --results is required");
  }
  const harness::StatsReport report = harness::run_stats(mm.methods, mm.values, alpha);
  const std::string text = report.to_json_string() + "\n";
  std::cout << text;
  if (!out_dir.empty()) {
    spill((std::filesystem::path(out_dir) / "stats_report.json").string(), text);
    std::string csv = "method,mean_rank,interval_lo,interval_hi\n";
    for (std::size_t i = 0; i < report.methods.size(); ++i)
      csv += report.methods[i] + "," + harness::format_value(report.mean_rank[i]) + "," +
             harness::format_value(report.intervals[i].first) + "," +
             harness::format_value(report.intervals[i].second) + "\n";
    spill((std::filesystem::path(out_dir) / "stats_intervals.csv").string(), csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SEMRes-DDPM oversampling toolkit"};
  app.require_subcommand(1);

  // ingest
  std::string ingest_data, ingest_positive, ingest_out;
  CLI::App* ingest = app.add_subcommand("ingest", "parse a dataset and report its shape");
  ingest->add_option("--data", ingest_data, "dataset file")->required();
  ingest->add_option("--positive", ingest_positive, "positive label (csv only)");
  ingest->add_option("--out", ingest_out, "write the summary JSON here instead of stdout");

  // train
  CommonOpts train_opts;
  std::string train_arch = "semst";
  std::string train_out;
  CLI::App* train = app.add_subcommand("train", "train a denoiser on the minority class");
  add_experiment_flags(train, train_opts);
  train->add_option("--arch", train_arch, "semst or mlp");
  train->add_option("--ckpt-out", train_out, "checkpoint directory")->required();

  // sample
  std::string sample_ckpt, sample_out;
  std::size_t sample_n = 0;
  std::uint64_t sample_seed = 17;
  CLI::App* sample = app.add_subcommand("sample", "generate rows from a trained checkpoint");
  sample->add_option("--ckpt", sample_ckpt, "checkpoint directory")->required();
  sample->add_option("--n", sample_n, "rows to generate")->required();
  sample->add_option("--seed", sample_seed, "sampling seed");
  sample->add_option("--out", sample_out, "output CSV (stdout when omitted)");

  // oversample
  CommonOpts over_opts;
  std::string over_method = "semres_ddpm";
  std::string over_out;
  CLI::App* oversample_cmd = app.add_subcommand("oversample", "balance a dataset with one method");
  add_experiment_flags(oversample_cmd, over_opts);
  oversample_cmd->add_option("--method", over_method, "none|smote|adasyn|semres_ddpm|mlp_ddpm");
  oversample_cmd->add_option("--balanced-out", over_out, "output CSV (stdout when omitted)");

  // evaluate
  CommonOpts eval_opts;
  CLI::App* evaluate = app.add_subcommand("evaluate", "cross-validated oversampling comparison");
  add_experiment_flags(evaluate, eval_opts);

  // denoise-bench
  CommonOpts bench_opts;
  std::string bench_ckpt_mlp, bench_ckpt_semst;
  CLI::App* bench = app.add_subcommand("denoise-bench", "paired reconstruction benchmark");
  add_experiment_flags(bench, bench_opts);
  bench->add_option("--ckpt-mlp", bench_ckpt_mlp, "reuse this mlp checkpoint instead of training");
  bench->add_option("--ckpt-semst", bench_ckpt_semst, "reuse this semst checkpoint instead of training");

  // dist-compare
  CommonOpts dist_opts;
  CLI::App* dist = app.add_subcommand("dist-compare", "real-vs-generated distribution comparison");
  add_experiment_flags(dist, dist_opts);

  // stats
  std::string stats_matrix, stats_results, stats_metric = "f1", stats_out;
  double stats_alpha = 0.05;
  CLI::App* stats = app.add_subcommand("stats", "Friedman test and Nemenyi intervals");
  stats->add_option("--matrix", stats_matrix, "wide-form metric matrix CSV (dataset,method...)");
  stats->add_option("--results", stats_results, "long-form results.csv from evaluate");
  stats->add_option("--metric", stats_metric, "metric to rank when using --results");
  stats->add_option("--alpha", stats_alpha, "significance level");
  stats->add_option("--out", stats_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) return cmd_ingest(ingest_data, ingest_positive, ingest_out);
    if (*train) return cmd_train(resolve(train, train_opts), train_arch, train_out);
    if (*sample) return cmd_sample(sample_ckpt, sample_n, sample_seed, sample_out);
    if (*oversample_cmd) return cmd_oversample(resolve(oversample_cmd, over_opts), over_method, over_out);
    if (*evaluate) {
      const harness::ExperimentConfig cfg = resolve(evaluate, eval_opts);
      const harness::ResultTable table = harness::run_evaluate(cfg);
      for (const std::string& w : table.warnings) std::cerr << "warning: " << w << "\n";
      for (const harness::CellError& e : table.errors)
        std::cerr << "cell failed: " << e.dataset << "/" << e.fold << "/" << e.method << ": "
                  << e.message << "\n";
      std::cout << table.records.size() << " records";
      if (!cfg.out_dir.empty()) std::cout << " written to " << cfg.out_dir;
      std::cout << "\n";
      return table.errors.empty() ? 0 : 1;
    }
    if (*bench) {
      const harness::ExperimentConfig cfg = resolve(bench, bench_opts);
      if (!bench_ckpt_mlp.empty() || !bench_ckpt_semst.empty()) {
        if (bench_ckpt_mlp.empty() || bench_ckpt_semst.empty() || cfg.datasets.size() != 1)
          throw CLI::ValidationError("denoise-bench",
                                     "checkpoint mode needs --ckpt-mlp, --ckpt-semst and one --data");
        const dataio::Dataset ds = harness::load_dataset(cfg.datasets[0], cfg.csv_positive_label);
        std::vector<dataio::Row> minority_rows;
        for (std::size_t i = 0; i < ds.n_rows(); ++i)
          if (ds.labels[i]) minority_rows.push_back(ds.rows[i]);
        const trainer::Checkpoint mlp_ckpt = trainer::load(bench_ckpt_mlp);
        const trainer::Checkpoint semst_ckpt = trainer::load(bench_ckpt_semst);
        const std::string fp = dataio::schema_fingerprint(ds.schema);
        if (!mlp_ckpt.schema_fingerprint.empty() && mlp_ckpt.schema_fingerprint != fp)
          throw std::runtime_error("mlp checkpoint was trained on a different schema");
        if (!semst_ckpt.schema_fingerprint.empty() && semst_ckpt.schema_fingerprint != fp)
          throw std::runtime_error("semst checkpoint was trained on a different schema");
        const dataio::EncodedMatrix enc = dataio::encode(minority_rows, semst_ckpt.normalizer);
        const std::string name = std::filesystem::path(cfg.datasets[0]).stem().string();
        const auto entry = harness::bench_pair(
            name, enc.values, mlp_ckpt, semst_ckpt, cfg.tprime, cfg.seed,
            cfg.out_dir.empty() ? std::filesystem::path{}
                                : std::filesystem::path(cfg.out_dir) / ("bench_" + name + "_scatter.csv"));
        std::cout << entry.dataset << ": psnr_mlp=" << harness::format_value(entry.psnr_mlp)
                  << " psnr_semst=" << harness::format_value(entry.psnr_semst) << "\n";
        return 0;
      }
      const auto entries = harness::run_denoise_bench(cfg);
      for (const auto& e : entries)
        std::cout << e.dataset << ": psnr_mlp=" << harness::format_value(e.psnr_mlp)
                  << " psnr_semst=" << harness::format_value(e.psnr_semst) << "\n";
      return 0;
    }
    if (*dist) {
      const auto entries = harness::run_dist_compare(resolve(dist, dist_opts));
      for (const auto& e : entries)
        std::cout << e.dataset
                  << ": two-feature pearson=" << harness::format_value(e.pearson_two_feature_mean)
                  << "\n";
      return 0;
    }
    if (*stats) return cmd_stats(stats_matrix, stats_results, stats_metric, stats_alpha, stats_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
