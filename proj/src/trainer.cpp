#include "semres/trainer.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace semres::trainer {

using nlohmann::json;

std::string arch_name(Arch a) { return a == Arch::semst ? "semst" : "mlp"; }

Arch arch_from_name(const std::string& name) {
  if (name == "semst") return Arch::semst;
  if (name == "mlp") return Arch::mlp;
  throw std::invalid_argument("unknown architecture '" + name + "'");
}

namespace {

std::unique_ptr<denoise::Denoiser> build(Arch arch, const denoise::SemstConfig& semst,
                                         const denoise::MlpConfig& mlp, std::uint64_t seed) {
  if (arch == Arch::semst) return std::make_unique<denoise::SemstResNet>(semst, seed);
  return std::make_unique<denoise::MlpDenoiser>(mlp, seed);
}

}  // namespace

TrainResult train(const nn::Matrix& minority, const TrainConfig& config,
                  const dataio::Normalizer& normalizer, const std::string& schema_fingerprint,
                  std::vector<std::string>* warnings) {
  const std::size_t n = minority.rows();
  const std::size_t d = minority.cols();
  if (n < 2) throw std::invalid_argument("train: need at least two rows");
  if (config.iterations < 1) throw std::invalid_argument("train: iterations must be at least 1");
  if (config.lr <= 0.0) throw std::invalid_argument("train: lr must be positive");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (minority(i, j) < 0.0 || minority(i, j) > 1.0)
        throw std::invalid_argument("train: matrix entries must lie in [0,1]");

  TrainConfig cfg = config;
  cfg.semst.d_in = static_cast<int>(d);
  cfg.mlp.d_in = static_cast<int>(d);
  std::size_t batch = cfg.batch_size > 0 ? static_cast<std::size_t>(cfg.batch_size)
                                         : std::min<std::size_t>(64, n);
  const bool with_replacement = batch > n;
  if (with_replacement && warnings)
    warnings->push_back("batch size " + std::to_string(batch) + " exceeds row count " +
                        std::to_string(n) + "; sampling with replacement");

  const diffusion::NoiseSchedule sched =
      diffusion::linear_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
  std::unique_ptr<denoise::Denoiser> den = build(cfg.arch, cfg.semst, cfg.mlp, cfg.seed);
  std::vector<nn::ParamRef> params = den->parameters();
  nn::Adam adam(cfg.lr);
  Rng rng(Rng::derive(cfg.seed, "train"));

  TrainResult result;
  result.loss_trace.reserve(cfg.iterations);
  result.smoothed_loss.reserve(cfg.iterations);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  double ema = 0.0;

  for (int it = 0; it < cfg.iterations; ++it) {
    // Draw the batch: a random subset, or i.i.d. rows when oversized.
    std::vector<std::size_t> picks(batch);
    if (with_replacement) {
      for (std::size_t b = 0; b < batch; ++b) picks[b] = rng.index(n);
    } else {
      for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t j = b + rng.index(n - b);
        std::swap(pool[b], pool[j]);
        picks[b] = pool[b];
      }
    }
    nn::Matrix s0(batch, d);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < d; ++j) s0(b, j) = minority(picks[b], j);

    std::vector<int> t(batch);
    for (std::size_t b = 0; b < batch; ++b) t[b] = static_cast<int>(rng.range(1, cfg.T));
    const nn::Matrix eps = diffusion::gaussian_matrix(batch, d, rng);

    const nn::Matrix s_t = diffusion::q_sample(s0, t, eps, sched);
    den->zero_grad();
    double loss = 0.0;
    try {
      const nn::Matrix predicted = den->forward(s_t, t, /*train=*/true);
      nn::Matrix d_pred;
      loss = diffusion::noise_mse(eps, predicted, &d_pred);
      den->backward(d_pred);
      adam.step(params);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("train: diverged at iteration " + std::to_string(it + 1) + " (" +
                               e.what() + ")");
    }

    ema = it == 0 ? loss : 0.99 * ema + 0.01 * loss;
    result.loss_trace.push_back(loss);
    result.smoothed_loss.push_back(ema);
  }

  result.steps = adam.step_count();
  result.checkpoint = snapshot(*den, cfg, normalizer, schema_fingerprint,
                               result.smoothed_loss.back());
  return result;
}

Checkpoint snapshot(denoise::Denoiser& den, const TrainConfig& config,
                    const dataio::Normalizer& normalizer, const std::string& schema_fingerprint,
                    double final_loss) {
  Checkpoint ckpt;
  ckpt.arch = config.arch;
  ckpt.semst = config.semst;
  ckpt.mlp = config.mlp;
  ckpt.T = config.T;
  ckpt.beta_start = config.beta_start;
  ckpt.beta_end = config.beta_end;
  ckpt.normalizer = normalizer;
  ckpt.schema_fingerprint = schema_fingerprint;
  ckpt.seed = config.seed;
  ckpt.final_loss = final_loss;
  for (const nn::ParamRef& p : den.parameters()) {
    ckpt.manifest.push_back({p.name, p.value->rows(), p.value->cols()});
    ckpt.weights.insert(ckpt.weights.end(), p.value->data(), p.value->data() + p.value->size());
  }
  return ckpt;
}

std::unique_ptr<denoise::Denoiser> instantiate(const Checkpoint& ckpt) {
  std::unique_ptr<denoise::Denoiser> den = build(ckpt.arch, ckpt.semst, ckpt.mlp, ckpt.seed);
  std::vector<nn::ParamRef> params = den->parameters();
  if (params.size() != ckpt.manifest.size())
    throw std::runtime_error("checkpoint: manifest entry count does not match the architecture");
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamShape& shape = ckpt.manifest[i];
    if (params[i].name != shape.name || params[i].value->rows() != shape.rows ||
        params[i].value->cols() != shape.cols)
      throw std::runtime_error("checkpoint: parameter '" + shape.name +
                               "' does not match the architecture");
    if (offset + params[i].value->size() > ckpt.weights.size())
      throw std::runtime_error("checkpoint: weight blob shorter than the manifest");
    std::copy_n(ckpt.weights.begin() + static_cast<std::ptrdiff_t>(offset),
                params[i].value->size(), params[i].value->data());
    offset += params[i].value->size();
  }
  if (offset != ckpt.weights.size())
    throw std::runtime_error("checkpoint: weight blob longer than the manifest");
  return den;
}

namespace {

constexpr const char* kFormatMarker = "semres-checkpoint";
constexpr int kFormatVersion = 1;

json normalizer_to_json(const dataio::Normalizer& norm) {
  json features = json::array();
  for (const dataio::FeatureSpec& f : norm.features) {
    json jf;
    jf["name"] = f.name;
    jf["kind"] = f.kind == dataio::FeatureKind::numeric ? "numeric" : "categorical";
    if (f.kind == dataio::FeatureKind::numeric) {
      jf["min"] = f.min;
      jf["max"] = f.max;
    } else {
      jf["categories"] = f.categories;
    }
    features.push_back(std::move(jf));
  }
  return features;
}

dataio::Normalizer normalizer_from_json(const json& features) {
  dataio::Normalizer norm;
  for (const json& jf : features) {
    dataio::FeatureSpec f;
    f.name = jf.at("name").get<std::string>();
    if (jf.at("kind").get<std::string>() == "numeric") {
      f.kind = dataio::FeatureKind::numeric;
      f.min = jf.at("min").get<double>();
      f.max = jf.at("max").get<double>();
    } else {
      f.kind = dataio::FeatureKind::categorical;
      f.categories = jf.at("categories").get<std::vector<std::string>>();
    }
    norm.features.push_back(std::move(f));
  }
  return norm;
}

void write_le_doubles(std::ofstream& out, const std::vector<double>& values) {
  for (const double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

std::vector<double> read_le_doubles(std::ifstream& in, std::size_t count) {
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8))
      throw std::runtime_error("checkpoint: weights.bin truncated");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    std::memcpy(&values[i], &bits, sizeof(double));
  }
  return values;
}

}  // namespace

void save(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json meta;
  meta["format"] = kFormatMarker;
  meta["version"] = kFormatVersion;
  meta["arch"] = arch_name(ckpt.arch);
  if (ckpt.arch == Arch::semst) {
    meta["semst"] = {{"d_in", ckpt.semst.d_in},
                     {"d_hidden", ckpt.semst.d_hidden},
                     {"n_blocks", ckpt.semst.n_blocks},
                     {"n_tokens", ckpt.semst.n_tokens},
                     {"n_heads", ckpt.semst.n_heads},
                     {"threshold_mode", denoise::threshold_mode_name(ckpt.semst.threshold_mode)}};
  } else {
    meta["mlp"] = {{"d_in", ckpt.mlp.d_in}, {"hidden", ckpt.mlp.hidden}};
  }
  meta["schedule"] = {{"T", ckpt.T}, {"beta_start", ckpt.beta_start}, {"beta_end", ckpt.beta_end}};
  meta["normalizer"] = normalizer_to_json(ckpt.normalizer);
  meta["schema_fingerprint"] = ckpt.schema_fingerprint;
  meta["seed"] = ckpt.seed;
  meta["final_loss"] = ckpt.final_loss;
  json manifest = json::array();
  for (const ParamShape& p : ckpt.manifest)
    manifest.push_back({{"name", p.name}, {"rows", p.rows}, {"cols", p.cols}});
  meta["params"] = std::move(manifest);

  std::ofstream meta_out(dir / "meta.json");
  if (!meta_out) throw std::runtime_error("checkpoint: cannot write " + (dir / "meta.json").string());
  meta_out << meta.dump(2) << '\n';

  std::ofstream weights_out(dir / "weights.bin", std::ios::binary);
  if (!weights_out)
    throw std::runtime_error("checkpoint: cannot write " + (dir / "weights.bin").string());
  write_le_doubles(weights_out, ckpt.weights);
}

Checkpoint load(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw std::runtime_error("checkpoint: cannot open " + (dir / "meta.json").string());
  json meta;
  try {
    meta_in >> meta;
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint: meta.json is not valid (" + std::string(e.what()) + ")");
  }
  if (!meta.contains("format") || meta["format"] != kFormatMarker)
    throw std::runtime_error("checkpoint: bad format marker in meta.json");
  if (meta.at("version").get<int>() != kFormatVersion)
    throw std::runtime_error("checkpoint: unsupported format version " +
                             std::to_string(meta.at("version").get<int>()));

  Checkpoint ckpt;
  ckpt.arch = arch_from_name(meta.at("arch").get<std::string>());
  if (ckpt.arch == Arch::semst) {
    const json& s = meta.at("semst");
    ckpt.semst.d_in = s.at("d_in").get<int>();
    ckpt.semst.d_hidden = s.at("d_hidden").get<int>();
    ckpt.semst.n_blocks = s.at("n_blocks").get<int>();
    ckpt.semst.n_tokens = s.at("n_tokens").get<int>();
    ckpt.semst.n_heads = s.at("n_heads").get<int>();
    ckpt.semst.threshold_mode =
        denoise::threshold_mode_from_name(s.at("threshold_mode").get<std::string>());
  } else {
    ckpt.mlp.d_in = meta.at("mlp").at("d_in").get<int>();
    ckpt.mlp.hidden = meta.at("mlp").at("hidden").get<std::vector<int>>();
  }
  ckpt.T = meta.at("schedule").at("T").get<int>();
  ckpt.beta_start = meta.at("schedule").at("beta_start").get<double>();
  ckpt.beta_end = meta.at("schedule").at("beta_end").get<double>();
  ckpt.normalizer = normalizer_from_json(meta.at("normalizer"));
  ckpt.schema_fingerprint = meta.at("schema_fingerprint").get<std::string>();
  ckpt.seed = meta.at("seed").get<std::uint64_t>();
  ckpt.final_loss = meta.at("final_loss").get<double>();

  std::size_t total = 0;
  for (const json& p : meta.at("params")) {
    ParamShape shape{p.at("name").get<std::string>(), p.at("rows").get<std::size_t>(),
                     p.at("cols").get<std::size_t>()};
    total += shape.rows * shape.cols;
    ckpt.manifest.push_back(std::move(shape));
  }

  std::ifstream weights_in(dir / "weights.bin", std::ios::binary);
  if (!weights_in)
    throw std::runtime_error("checkpoint: cannot open " + (dir / "weights.bin").string());
  weights_in.seekg(0, std::ios::end);
  const std::size_t file_bytes = static_cast<std::size_t>(weights_in.tellg());
  if (file_bytes != total * sizeof(double))
    throw std::runtime_error("checkpoint: weights.bin holds " +
                             std::to_string(file_bytes / sizeof(double)) +
                             " doubles but the manifest declares " + std::to_string(total));
  weights_in.seekg(0, std::ios::beg);
  ckpt.weights = read_le_doubles(weights_in, total);
  return ckpt;
}

bool checkpoints_equal(const Checkpoint& a, const Checkpoint& b) {
  const auto norm_eq = [](const dataio::Normalizer& x, const dataio::Normalizer& y) {
    if (x.features.size() != y.features.size()) return false;
    for (std::size_t i = 0; i < x.features.size(); ++i) {
      const auto& f = x.features[i];
      const auto& g = y.features[i];
      if (f.name != g.name || f.kind != g.kind || f.categories != g.categories || f.min != g.min ||
          f.max != g.max)
        return false;
    }
    return true;
  };
  return a.arch == b.arch && a.T == b.T && a.beta_start == b.beta_start &&
         a.beta_end == b.beta_end && a.manifest == b.manifest && a.weights == b.weights &&
         a.schema_fingerprint == b.schema_fingerprint && a.seed == b.seed &&
         a.final_loss == b.final_loss && norm_eq(a.normalizer, b.normalizer) &&
         (a.arch == Arch::semst
              ? (a.semst.d_in == b.semst.d_in && a.semst.d_hidden == b.semst.d_hidden &&
                 a.semst.n_blocks == b.semst.n_blocks && a.semst.n_tokens == b.semst.n_tokens &&
                 a.semst.n_heads == b.semst.n_heads &&
                 a.semst.threshold_mode == b.semst.threshold_mode)
              : (a.mlp.d_in == b.mlp.d_in && a.mlp.hidden == b.mlp.hidden));
}

}  // namespace semres::trainer
