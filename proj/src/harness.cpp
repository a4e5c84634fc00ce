#include "semres/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "semres/classifiers.hpp"
#include "semres/diffusion.hpp"
#include "semres/rng.hpp"

namespace semres::harness {

using nlohmann::json;

void ExperimentConfig::apply_desk_scale() {
  T = 100;
  iterations = 3000;
  beta_start = 1e-3;
  beta_end = 0.2;
  lr = 2e-3;  // shorter budget, faster steps; applied to every denoiser alike
}

trainer::TrainConfig ExperimentConfig::train_config(trainer::Arch arch) const {
  trainer::TrainConfig cfg;
  cfg.iterations = iterations;
  cfg.T = T;
  cfg.beta_start = beta_start;
  cfg.beta_end = beta_end;
  cfg.batch_size = batch_size;
  cfg.lr = lr;
  cfg.seed = seed;
  cfg.arch = arch;
  cfg.semst.d_hidden = d_hidden;
  cfg.semst.n_blocks = n_blocks;
  cfg.semst.n_tokens = n_tokens;
  cfg.semst.n_heads = n_heads;
  cfg.semst.threshold_mode = denoise::threshold_mode_from_name(threshold_mode);
  cfg.mlp.hidden = mlp_hidden;
  return cfg;
}

namespace {

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["datasets"] = c.datasets;
  j["methods"] = c.methods;
  j["classifiers"] = c.classifiers;
  j["folds"] = c.folds;
  j["seed"] = c.seed;
  j["T"] = c.T;
  j["iterations"] = c.iterations;
  j["beta_start"] = c.beta_start;
  j["beta_end"] = c.beta_end;
  j["d_hidden"] = c.d_hidden;
  j["n_blocks"] = c.n_blocks;
  j["n_tokens"] = c.n_tokens;
  j["n_heads"] = c.n_heads;
  j["threshold_mode"] = c.threshold_mode;
  j["mlp_hidden"] = c.mlp_hidden;
  j["lr"] = c.lr;
  j["batch_size"] = c.batch_size;
  j["smote_k"] = c.smote_k;
  j["adasyn_k"] = c.adasyn_k;
  j["tprime"] = c.tprime;
  j["jobs"] = c.jobs;
  j["csv_positive_label"] = c.csv_positive_label;
  j["out_dir"] = c.out_dir;
  return j;
}

ExperimentConfig config_from_json(const json& in) {
  const json& j = in.contains("config") ? in.at("config") : in;
  ExperimentConfig c;
  const auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  opt("datasets", c.datasets);
  opt("methods", c.methods);
  opt("classifiers", c.classifiers);
  opt("folds", c.folds);
  opt("seed", c.seed);
  opt("T", c.T);
  opt("iterations", c.iterations);
  opt("beta_start", c.beta_start);
  opt("beta_end", c.beta_end);
  opt("d_hidden", c.d_hidden);
  opt("n_blocks", c.n_blocks);
  opt("n_tokens", c.n_tokens);
  opt("n_heads", c.n_heads);
  opt("threshold_mode", c.threshold_mode);
  opt("mlp_hidden", c.mlp_hidden);
  opt("lr", c.lr);
  opt("batch_size", c.batch_size);
  opt("smote_k", c.smote_k);
  opt("adasyn_k", c.adasyn_k);
  opt("tprime", c.tprime);
  opt("jobs", c.jobs);
  opt("csv_positive_label", c.csv_positive_label);
  opt("out_dir", c.out_dir);
  return c;
}

std::string dataset_name(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::uint64_t hash_rows(const dataio::Dataset& ds, const std::vector<std::size_t>& idx) {
  std::uint64_t h = 1469598103934665603ull;
  const auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  for (const std::size_t i : idx) {
    for (const double v : ds.rows[i]) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      mix(bits);
    }
    mix(ds.labels[i]);
  }
  return h;
}

// Indices of the two highest-variance numeric encoded columns (falls back to
// the first columns when fewer exist).
std::pair<std::size_t, std::size_t> scatter_columns(const nn::Matrix& m,
                                                    const std::vector<dataio::ColumnOrigin>& map) {
  std::vector<std::pair<double, std::size_t>> vars;
  for (std::size_t j = 0; j < m.cols(); ++j) {
    if (j < map.size() && map[j].category >= 0) continue;
    double mean = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) mean += m(i, j);
    mean /= static_cast<double>(m.rows());
    double var = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double d = m(i, j) - mean;
      var += d * d;
    }
    vars.emplace_back(-var, j);
  }
  if (vars.empty())
    for (std::size_t j = 0; j < std::min<std::size_t>(2, m.cols()); ++j) vars.emplace_back(0.0, j);
  std::sort(vars.begin(), vars.end());
  const std::size_t a = vars[0].second;
  const std::size_t b = vars.size() > 1 ? vars[1].second : a;
  return {a, b};
}

}  // namespace

std::string ExperimentConfig::to_json_string() const { return config_to_json(*this).dump(2); }

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
  return config_from_json(json::parse(text));
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

dataio::Dataset load_dataset(const std::string& path, const std::string& csv_positive_label) {
  const std::string text = read_file(path);
  const std::string ext = std::filesystem::path(path).extension().string();
  if (ext == ".dat" || ext == ".keel") return dataio::parse_keel(text);
  return dataio::parse_csv(text, csv_positive_label);
}

std::vector<AggregateRecord> ResultTable::aggregates() const {
  std::vector<AggregateRecord> out;
  const auto key_of = [](const ResultRecord& r) {
    return r.dataset + "\x1f" + r.method + "\x1f" + r.classifier + "\x1f" + r.metric;
  };
  std::vector<std::string> seen;
  for (const ResultRecord& r : records) {
    const std::string key = key_of(r);
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    std::vector<double> values;
    for (const ResultRecord& s : records)
      if (key_of(s) == key) values.push_back(s.value);
    AggregateRecord agg;
    agg.dataset = r.dataset;
    agg.method = r.method;
    agg.classifier = r.classifier;
    agg.metric = r.metric;
    agg.folds = static_cast<int>(values.size());
    agg.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    double ss = 0.0;
    for (const double v : values) ss += (v - agg.mean) * (v - agg.mean);
    agg.stddev = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
    out.push_back(std::move(agg));
  }
  return out;
}

std::string ResultTable::to_csv() const {
  std::string out = "dataset,method,classifier,fold,metric,value\n";
  for (const ResultRecord& r : records) {
    out += r.dataset + "," + r.method + "," + r.classifier + "," + std::to_string(r.fold) + "," +
           r.metric + "," + format_value(r.value) + "\n";
  }
  return out;
}

ResultTable ResultTable::from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "dataset,method,classifier,fold,metric,value")
    throw std::runtime_error("result CSV: unexpected header");
  ResultTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cur;
    for (const char c : line) {
      if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    cells.push_back(cur);
    if (cells.size() != 6) throw std::runtime_error("result CSV: malformed line: " + line);
    ResultRecord r;
    r.dataset = cells[0];
    r.method = cells[1];
    r.classifier = cells[2];
    r.fold = std::stoi(cells[3]);
    r.metric = cells[4];
    r.value = std::stod(cells[5]);
    table.records.push_back(std::move(r));
  }
  return table;
}

double ResultTable::mean_metric(const std::string& dataset, const std::string& method,
                                const std::string& metric) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const ResultRecord& r : records) {
    if (r.dataset != dataset || r.method != method || r.metric != metric) continue;
    sum += r.value;
    ++n;
  }
  if (n == 0) throw std::runtime_error("no records for " + dataset + "/" + method + "/" + metric);
  return sum / static_cast<double>(n);
}

namespace {

struct Unit {
  std::size_t dataset_idx = 0;
  int fold = 0;
  std::size_t method_idx = 0;
};

struct UnitOutcome {
  std::vector<ResultRecord> records;
  std::vector<std::string> warnings;
  bool failed = false;
  std::string error;
};

UnitOutcome run_unit(const ExperimentConfig& cfg, const dataio::Dataset& ds,
                     const std::string& ds_name, const dataio::FoldPlan& plan, const Unit& unit) {
  UnitOutcome out;
  const std::string& method = cfg.methods[unit.method_idx];
  try {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
      (plan.assignments[i] == unit.fold ? test_idx : train_idx).push_back(i);

    const std::uint64_t test_hash_before = hash_rows(ds, test_idx);

    oversample::OversampleRequest req;
    req.data = &ds;
    req.train_idx = train_idx;
    req.method = method;
    req.seed = Rng::derive(cfg.seed, ds_name + "/" + std::to_string(unit.fold) + "/" + method);
    req.smote_k = cfg.smote_k;
    req.adasyn_k = cfg.adasyn_k;
    req.diffusion = cfg.train_config(method == "mlp_ddpm" ? trainer::Arch::mlp : trainer::Arch::semst);
    req.diffusion.seed = req.seed;

    oversample::BalancedTrainSet balanced = oversample::balance(req);
    out.warnings = balanced.warnings;

    if (hash_rows(ds, test_idx) != test_hash_before)
      throw std::logic_error("test fold mutated during balancing");

    std::vector<dataio::Row> test_rows;
    std::vector<std::uint8_t> test_y;
    for (const std::size_t i : test_idx) {
      test_rows.push_back(ds.rows[i]);
      test_y.push_back(ds.labels[i]);
    }
    const dataio::EncodedMatrix test_enc = dataio::encode(test_rows, balanced.normalizer);

    for (const std::string& clf_name : cfg.classifiers) {
      const classify::ClassifierKind kind = classify::kind_from_name(clf_name);
      const classify::Classifier clf = classify::Classifier::fit(kind, balanced.x, balanced.y);
      const std::vector<double> scores = clf.score(test_enc.values);
      std::vector<std::uint8_t> preds(scores.size());
      for (std::size_t i = 0; i < scores.size(); ++i) preds[i] = scores[i] >= 0.5 ? 1 : 0;
      const metrics::ConfusionMatrix cm = metrics::confusion(test_y, preds);
      const double f1 = metrics::f1(cm);
      const double gm = metrics::g_mean(cm);
      const double auc = metrics::auc(scores, test_y);
      for (const auto& [name, value] :
           {std::pair<const char*, double>{"f1", f1}, {"g_mean", gm}, {"auc", auc}})
        out.records.push_back({ds_name, method, clf_name, unit.fold, name, value});
    }
  } catch (const std::exception& e) {
    out.failed = true;
    out.error = e.what();
  }
  return out;
}

void run_units_parallel(std::size_t n_units, int jobs, const std::function<void(std::size_t)>& work) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n_units));
  if (workers == 1) {
    for (std::size_t i = 0; i < n_units; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n_units) return;
        work(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

}  // namespace

ResultTable run_evaluate(const ExperimentConfig& config) {
  if (config.datasets.empty()) throw std::invalid_argument("evaluate: no datasets configured");
  if (config.methods.empty()) throw std::invalid_argument("evaluate: no methods configured");
  if (config.classifiers.empty()) throw std::invalid_argument("evaluate: no classifiers configured");
  if (config.folds < 2) throw std::invalid_argument("evaluate: folds must be at least 2");
  for (const std::string& c : config.classifiers) classify::kind_from_name(c);

  std::vector<dataio::Dataset> datasets;
  std::vector<std::string> names;
  std::vector<dataio::FoldPlan> plans;
  for (const std::string& path : config.datasets) {
    datasets.push_back(load_dataset(path, config.csv_positive_label));
    names.push_back(dataset_name(path));
    plans.push_back(dataio::stratified_kfold(datasets.back(), config.folds,
                                             Rng::derive(config.seed, names.back() + "/folds")));
  }

  std::vector<Unit> units;
  for (std::size_t d = 0; d < datasets.size(); ++d)
    for (int f = 0; f < config.folds; ++f)
      for (std::size_t m = 0; m < config.methods.size(); ++m) units.push_back({d, f, m});

  std::vector<UnitOutcome> outcomes(units.size());
  run_units_parallel(units.size(), config.jobs, [&](std::size_t i) {
    const Unit& u = units[i];
    outcomes[i] = run_unit(config, datasets[u.dataset_idx], names[u.dataset_idx],
                           plans[u.dataset_idx], u);
  });

  ResultTable table;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const Unit& u = units[i];
    UnitOutcome& o = outcomes[i];
    if (o.failed) {
      table.errors.push_back({names[u.dataset_idx], config.methods[u.method_idx], u.fold, o.error});
      continue;
    }
    for (ResultRecord& r : o.records) table.records.push_back(std::move(r));
    for (std::string& w : o.warnings)
      table.warnings.push_back(names[u.dataset_idx] + "/" + std::to_string(u.fold) + ": " + w);
  }

  if (!config.out_dir.empty()) {
    const std::filesystem::path out(config.out_dir);
    std::filesystem::create_directories(out);
    write_file(out / "results.csv", table.to_csv());
    std::string agg_csv = "dataset,method,classifier,metric,mean,std,folds\n";
    for (const AggregateRecord& a : table.aggregates())
      agg_csv += a.dataset + "," + a.method + "," + a.classifier + "," + a.metric + "," +
                 format_value(a.mean) + "," + format_value(a.stddev) + "," +
                 std::to_string(a.folds) + "\n";
    write_file(out / "aggregates.csv", agg_csv);
    json manifest;
    manifest["tool"] = "semres";
    manifest["command"] = "evaluate";
    manifest["config"] = config_to_json(config);
    write_file(out / "manifest.json", manifest.dump(2) + "\n");
    json summary;
    summary["records"] = table.records.size();
    summary["failed_cells"] = json::array();
    for (const CellError& e : table.errors)
      summary["failed_cells"].push_back(
          {{"dataset", e.dataset}, {"method", e.method}, {"fold", e.fold}, {"error", e.message}});
    summary["warnings"] = table.warnings;
    write_file(out / "summary.json", summary.dump(2) + "\n");
  }
  return table;
}

DenoiseBenchEntry bench_pair(const std::string& name, const nn::Matrix& minority,
                             const trainer::Checkpoint& mlp_ckpt,
                             const trainer::Checkpoint& semst_ckpt, int tprime, std::uint64_t seed,
                             const std::filesystem::path& scatter_csv) {
  if (mlp_ckpt.arch != trainer::Arch::mlp || semst_ckpt.arch != trainer::Arch::semst)
    throw std::invalid_argument("bench_pair: checkpoints must be one mlp and one semst");
  if (mlp_ckpt.T != semst_ckpt.T || mlp_ckpt.beta_start != semst_ckpt.beta_start ||
      mlp_ckpt.beta_end != semst_ckpt.beta_end)
    throw std::invalid_argument("bench_pair: checkpoints disagree on the noise schedule");
  if (mlp_ckpt.d_in() != static_cast<int>(minority.cols()) ||
      semst_ckpt.d_in() != static_cast<int>(minority.cols()))
    throw std::invalid_argument("bench_pair: checkpoint width does not match the data");
  if (!mlp_ckpt.schema_fingerprint.empty() && !semst_ckpt.schema_fingerprint.empty() &&
      mlp_ckpt.schema_fingerprint != semst_ckpt.schema_fingerprint)
    throw std::invalid_argument("bench_pair: checkpoints were fitted on different schemas");

  const diffusion::NoiseSchedule sched = semst_ckpt.schedule();
  const int start = tprime < 0 ? sched.T : tprime;
  if (start > sched.T) throw std::invalid_argument("bench_pair: start step exceeds schedule T");

  // One seeded stream per model, rebuilt from the same seed so both consume
  // identical noise draws.
  const std::uint64_t noise_seed = Rng::derive(seed, name + "/bench-noise");
  const auto reconstruct = [&](const trainer::Checkpoint& ckpt) {
    if (start == 0) return minority;
    std::unique_ptr<denoise::Denoiser> den = trainer::instantiate(ckpt);
    Rng rng(noise_seed);
    const nn::Matrix eps = diffusion::gaussian_matrix(minority.rows(), minority.cols(), rng);
    const nn::Matrix s_t = diffusion::q_sample(minority, start, eps, sched);
    return diffusion::denoise_from(*den, s_t, start, sched, rng);
  };

  const nn::Matrix recon_mlp = reconstruct(mlp_ckpt);
  const nn::Matrix recon_semst = reconstruct(semst_ckpt);

  DenoiseBenchEntry entry;
  entry.dataset = name;
  entry.psnr_mlp = metrics::psnr(minority, recon_mlp);
  entry.psnr_semst = metrics::psnr(minority, recon_semst);

  if (!scatter_csv.empty()) {
    const auto [cx, cy] = scatter_columns(minority, {});
    std::string csv = "orig_x,orig_y,mlp_x,mlp_y,ours_x,ours_y\n";
    for (std::size_t i = 0; i < minority.rows(); ++i) {
      csv += format_value(minority(i, cx)) + "," + format_value(minority(i, cy)) + "," +
             format_value(recon_mlp(i, cx)) + "," + format_value(recon_mlp(i, cy)) + "," +
             format_value(recon_semst(i, cx)) + "," + format_value(recon_semst(i, cy)) + "\n";
    }
    write_file(scatter_csv, csv);
  }
  return entry;
}

std::vector<DenoiseBenchEntry> run_denoise_bench(const ExperimentConfig& config) {
  if (config.datasets.empty()) throw std::invalid_argument("denoise-bench: no datasets configured");
  std::vector<DenoiseBenchEntry> entries(config.datasets.size());

  run_units_parallel(config.datasets.size(), config.jobs, [&](std::size_t i) {
    const std::string& path = config.datasets[i];
    const std::string name = dataset_name(path);
    const dataio::Dataset ds = load_dataset(path, config.csv_positive_label);
    std::vector<dataio::Row> minority_rows;
    for (std::size_t r = 0; r < ds.n_rows(); ++r)
      if (ds.labels[r]) minority_rows.push_back(ds.rows[r]);
    auto [encoded, norm] = dataio::fit_encode(minority_rows, ds.schema);
    const std::string fp = dataio::schema_fingerprint(ds.schema);

    trainer::TrainConfig mlp_cfg = config.train_config(trainer::Arch::mlp);
    mlp_cfg.seed = Rng::derive(config.seed, name + "/bench-train/mlp");
    trainer::TrainConfig semst_cfg = config.train_config(trainer::Arch::semst);
    semst_cfg.seed = Rng::derive(config.seed, name + "/bench-train/semst");

    const trainer::TrainResult mlp_run = trainer::train(encoded.values, mlp_cfg, norm, fp);
    const trainer::TrainResult semst_run = trainer::train(encoded.values, semst_cfg, norm, fp);

    const std::filesystem::path scatter =
        config.out_dir.empty() ? std::filesystem::path{}
                               : std::filesystem::path(config.out_dir) / ("bench_" + name + "_scatter.csv");
    entries[i] = bench_pair(name, encoded.values, mlp_run.checkpoint, semst_run.checkpoint,
                            config.tprime, config.seed, scatter);
  });

  if (!config.out_dir.empty()) {
    json report;
    report["protocol"] =
        "paired reconstruction: each minority row is noised to the start step with a seeded "
        "draw and reconstructed by the full reverse chain; both models share one noise stream";
    report["start_step"] = config.tprime < 0 ? config.T : config.tprime;
    report["entries"] = json::array();
    for (const DenoiseBenchEntry& e : entries)
      report["entries"].push_back(
          {{"dataset", e.dataset}, {"psnr_mlp", e.psnr_mlp}, {"psnr_semst", e.psnr_semst}});
    json manifest;
    manifest["tool"] = "semres";
    manifest["command"] = "denoise-bench";
    manifest["config"] = config_to_json(config);
    write_file(std::filesystem::path(config.out_dir) / "manifest.json", manifest.dump(2) + "\n");
    write_file(std::filesystem::path(config.out_dir) / "bench_report.json", report.dump(2) + "\n");
  }
  return entries;
}

std::vector<DistCompareEntry> run_dist_compare(const ExperimentConfig& config) {
  if (config.datasets.empty()) throw std::invalid_argument("dist-compare: no datasets configured");
  std::vector<DistCompareEntry> entries(config.datasets.size());

  run_units_parallel(config.datasets.size(), config.jobs, [&](std::size_t idx) {
    const std::string& path = config.datasets[idx];
    const std::string name = dataset_name(path);
    const dataio::Dataset ds = load_dataset(path, config.csv_positive_label);
    std::vector<dataio::Row> minority_rows;
    for (std::size_t r = 0; r < ds.n_rows(); ++r)
      if (ds.labels[r]) minority_rows.push_back(ds.rows[r]);
    auto [encoded, norm] = dataio::fit_encode(minority_rows, ds.schema);

    trainer::TrainConfig cfg = config.train_config(trainer::Arch::semst);
    cfg.seed = Rng::derive(config.seed, name + "/dist-train");
    const trainer::TrainResult run = trainer::train(encoded.values, cfg, norm,
                                                    dataio::schema_fingerprint(ds.schema));
    std::unique_ptr<denoise::Denoiser> den = trainer::instantiate(run.checkpoint);
    Rng rng(Rng::derive(config.seed, name + "/dist-sample"));
    nn::Matrix synth = diffusion::sample(*den, encoded.values.rows(), encoded.values.cols(),
                                         run.checkpoint.schedule(), rng);
    for (std::size_t i = 0; i < synth.rows(); ++i)
      for (std::size_t j = 0; j < synth.cols(); ++j) synth(i, j) = std::clamp(synth(i, j), 0.0, 1.0);

    DistCompareEntry entry;
    entry.dataset = name;
    std::vector<std::size_t> numeric_cols;
    for (std::size_t j = 0; j < encoded.column_map.size(); ++j) {
      const dataio::ColumnOrigin& origin = encoded.column_map[j];
      if (origin.category >= 0) continue;
      numeric_cols.push_back(j);
      entry.feature_names.push_back(norm.features[origin.feature].name);
    }
    for (const std::size_t j : numeric_cols) {
      std::vector<double> real(encoded.values.rows()), gen(synth.rows());
      for (std::size_t i = 0; i < encoded.values.rows(); ++i) real[i] = encoded.values(i, j);
      for (std::size_t i = 0; i < synth.rows(); ++i) gen[i] = synth(i, j);
      double rho = 0.0;
      try {
        rho = metrics::quantile_matched_pearson(real, gen);
      } catch (const std::invalid_argument&) {
        // Degenerate (constant) marginal: equal distributions count as
        // matched, anything else as unmatched.
        rho = metrics::ecdf_distance(real, gen) == 0.0 ? 1.0 : 0.0;
      }
      entry.pearson_per_feature.push_back(rho);
      entry.ecdf_distance_per_feature.push_back(metrics::ecdf_distance(real, gen));
    }

    const auto [ca, cb] = scatter_columns(encoded.values, encoded.column_map);
    double two = 0.0;
    int two_n = 0;
    for (std::size_t m = 0; m < numeric_cols.size(); ++m) {
      if (numeric_cols[m] == ca || numeric_cols[m] == cb) {
        two += entry.pearson_per_feature[m];
        ++two_n;
      }
    }
    entry.pearson_two_feature_mean = two_n ? two / two_n : 0.0;

    if (!config.out_dir.empty()) {
      const std::filesystem::path out(config.out_dir);
      std::string hist = "feature,bin,lo,hi,real,synthetic\n";
      constexpr int kBins = 32;
      for (std::size_t m = 0; m < numeric_cols.size(); ++m) {
        const std::size_t j = numeric_cols[m];
        std::vector<long> real_counts(kBins, 0), synth_counts(kBins, 0);
        const auto bin_of = [&](double v) {
          return std::min<int>(kBins - 1, std::max(0, static_cast<int>(v * kBins)));
        };
        for (std::size_t i = 0; i < encoded.values.rows(); ++i)
          real_counts[bin_of(encoded.values(i, j))]++;
        for (std::size_t i = 0; i < synth.rows(); ++i) synth_counts[bin_of(synth(i, j))]++;
        for (int b = 0; b < kBins; ++b)
          hist += entry.feature_names[m] + "," + std::to_string(b) + "," +
                  format_value(static_cast<double>(b) / kBins) + "," +
                  format_value(static_cast<double>(b + 1) / kBins) + "," +
                  std::to_string(real_counts[b]) + "," + std::to_string(synth_counts[b]) + "\n";
      }
      write_file(out / ("dist_" + name + "_hist.csv"), hist);

      std::string ecdf = "feature,value,real_cdf,synthetic_cdf\n";
      for (std::size_t m = 0; m < numeric_cols.size(); ++m) {
        const std::size_t j = numeric_cols[m];
        std::vector<double> real(encoded.values.rows()), gen(synth.rows());
        for (std::size_t i = 0; i < encoded.values.rows(); ++i) real[i] = encoded.values(i, j);
        for (std::size_t i = 0; i < synth.rows(); ++i) gen[i] = synth(i, j);
        std::sort(real.begin(), real.end());
        std::sort(gen.begin(), gen.end());
        std::vector<double> grid = real;
        grid.insert(grid.end(), gen.begin(), gen.end());
        std::sort(grid.begin(), grid.end());
        grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
        for (const double v : grid) {
          const double fr = static_cast<double>(std::upper_bound(real.begin(), real.end(), v) -
                                                real.begin()) /
                            static_cast<double>(real.size());
          const double fg =
              static_cast<double>(std::upper_bound(gen.begin(), gen.end(), v) - gen.begin()) /
              static_cast<double>(gen.size());
          ecdf += entry.feature_names[m] + "," + format_value(v) + "," + format_value(fr) + "," +
                  format_value(fg) + "\n";
        }
      }
      write_file(out / ("dist_" + name + "_ecdf.csv"), ecdf);
    }
    entries[idx] = std::move(entry);
  });

  if (!config.out_dir.empty()) {
    json report;
    report["protocol"] =
        "per-feature comparison of minority rows against generated rows: 32-bin histograms over "
        "[0,1], empirical CDFs, and quantile-matched correlation (sorted samples resampled to a "
        "common grid)";
    report["entries"] = json::array();
    for (const DistCompareEntry& e : entries) {
      json je;
      je["dataset"] = e.dataset;
      je["features"] = e.feature_names;
      je["pearson"] = e.pearson_per_feature;
      je["pearson_two_feature_mean"] = e.pearson_two_feature_mean;
      je["ecdf_distance"] = e.ecdf_distance_per_feature;
      report["entries"].push_back(std::move(je));
    }
    json manifest;
    manifest["tool"] = "semres";
    manifest["command"] = "dist-compare";
    manifest["config"] = config_to_json(config);
    write_file(std::filesystem::path(config.out_dir) / "manifest.json", manifest.dump(2) + "\n");
    write_file(std::filesystem::path(config.out_dir) / "dist_report.json", report.dump(2) + "\n");
  }
  return entries;
}

StatsReport run_stats(const std::vector<std::string>& methods,
                      const std::vector<std::vector<double>>& matrix, double alpha) {
  const metrics::RankTable table = metrics::mean_ranks(matrix, /*higher_better=*/true);
  if (table.n_methods != methods.size()) throw std::invalid_argument("run_stats: method count mismatch");
  const metrics::FriedmanResult fr = metrics::friedman(table);
  StatsReport report;
  report.methods = methods;
  report.mean_rank = table.mean_ranks;
  report.chi2 = fr.chi2;
  report.p_value = fr.p_value;
  report.critical_difference = metrics::nemenyi_cd(table.n_methods, table.n_datasets, alpha);
  report.significant = fr.p_value < alpha;
  for (const double r : table.mean_ranks)
    report.intervals.emplace_back(r - report.critical_difference / 2.0,
                                  r + report.critical_difference / 2.0);
  return report;
}

std::string StatsReport::to_json_string() const {
  json j;
  j["mean_ranks"] = json::object();
  j["intervals"] = json::object();
  for (std::size_t i = 0; i < methods.size(); ++i) {
    j["mean_ranks"][methods[i]] = mean_rank[i];
    j["intervals"][methods[i]] = {intervals[i].first, intervals[i].second};
  }
  j["chi2"] = chi2;
  j["p_value"] = p_value;
  j["critical_difference"] = critical_difference;
  j["significant"] = significant;
  j["note"] = significant ? "significant difference between methods"
                          : "no significant difference between methods";
  return j.dump(2);
}

MetricMatrix metric_matrix_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("matrix CSV: empty input");
  MetricMatrix mm;
  {
    std::istringstream hs(line);
    std::string cell;
    bool first = true;
    while (std::getline(hs, cell, ',')) {
      if (first) {
        first = false;
        continue;
      }
      mm.methods.push_back(cell);
    }
  }
  if (mm.methods.empty()) throw std::runtime_error("matrix CSV: no method columns");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> row;
    bool first = true;
    while (std::getline(ls, cell, ',')) {
      if (first) {
        mm.datasets.push_back(cell);
        first = false;
        continue;
      }
      row.push_back(std::stod(cell));
    }
    if (row.size() != mm.methods.size())
      throw std::runtime_error("matrix CSV: row width mismatch at dataset " + mm.datasets.back());
    mm.values.push_back(std::move(row));
  }
  if (mm.values.empty()) throw std::runtime_error("matrix CSV: no data rows");
  return mm;
}

MetricMatrix metric_matrix_from_results(const ResultTable& table, const std::string& metric) {
  MetricMatrix mm;
  for (const ResultRecord& r : table.records) {
    if (r.metric != metric) continue;
    if (std::find(mm.datasets.begin(), mm.datasets.end(), r.dataset) == mm.datasets.end())
      mm.datasets.push_back(r.dataset);
    if (std::find(mm.methods.begin(), mm.methods.end(), r.method) == mm.methods.end())
      mm.methods.push_back(r.method);
  }
  if (mm.datasets.empty()) throw std::runtime_error("no records carry metric '" + metric + "'");

  std::vector<std::string> missing;
  for (const std::string& ds : mm.datasets) {
    std::vector<double> row;
    for (const std::string& method : mm.methods) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const ResultRecord& r : table.records) {
        if (r.metric != metric || r.dataset != ds || r.method != method) continue;
        sum += r.value;
        ++n;
      }
      if (n == 0) {
        missing.push_back(ds + "/" + method);
        row.push_back(0.0);
      } else {
        row.push_back(sum / static_cast<double>(n));
      }
    }
    mm.values.push_back(std::move(row));
  }
  if (!missing.empty()) {
    std::string msg = "missing cells:";
    for (const std::string& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }
  return mm;
}

}  // namespace semres::harness
