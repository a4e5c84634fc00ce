#include "semres/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "semres/rng.hpp"

namespace semres::datagen {

const std::vector<DatasetShape>& benchmark_shapes() {
  static const std::vector<DatasetShape> shapes = {
      {"abalone9-18", 8, 42, 689, 1},
      {"ecoli4", 7, 20, 316, 0},
      {"page-blocks-1-3-vs-4", 10, 28, 444, 0},
      {"yeast5", 8, 44, 1440, 0},
      {"yeast-0-5-6-7-9-vs-4", 8, 51, 477, 0},
      {"yeast-2-vs-4", 9, 51, 463, 0},
      {"ecoli1", 7, 77, 259, 0},
      {"ecoli2", 7, 52, 284, 0},
      {"ecoli3", 7, 35, 301, 0},
      {"ecoli-0-vs-1", 7, 77, 143, 0},
      {"glass-0-1-2-3-vs-4-5-6", 9, 51, 163, 0},
      {"haberman", 3, 81, 225, 0},
      {"newthyroid2", 5, 35, 180, 0},
      {"segment0", 19, 329, 1979, 0},
      {"vehicle2", 18, 218, 628, 0},
      {"yeast3", 8, 163, 1321, 0},
      {"heart", 13, 120, 150, 3},
      {"ionosphere", 33, 126, 225, 0},
      {"spambase", 57, 1812, 2785, 0},
      {"titanic", 3, 711, 1490, 2},
  };
  return shapes;
}

const DatasetShape& shape_by_name(const std::string& name) {
  for (const DatasetShape& s : benchmark_shapes())
    if (s.name == name) return s;
  throw std::invalid_argument("no stock dataset shape named '" + name + "'");
}

namespace {

std::vector<double> gaussian_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.gaussian();
  return v;
}

}  // namespace

dataio::Dataset generate(const DatasetShape& shape, std::uint64_t seed) {
  if (shape.features < 2) throw std::invalid_argument("generate: need at least two features");
  if (shape.n_min < 2 || shape.n_maj < shape.n_min)
    throw std::invalid_argument("generate: class counts must satisfy 2 <= n_min <= n_maj");
  if (shape.n_categorical < 0 || shape.n_categorical >= shape.features)
    throw std::invalid_argument("generate: at least one feature must stay numeric");

  Rng rng(Rng::derive(seed, "datagen/" + shape.name));
  const std::size_t d = static_cast<std::size_t>(shape.features);
  const std::size_t q = std::max<std::size_t>(2, d / 3);

  // Shared factor loadings give correlated features; each class is a small
  // Gaussian mixture in the latent space with partial overlap between
  // classes.
  std::vector<std::vector<double>> loading(d);
  for (auto& row : loading) {
    row = gaussian_vec(q, rng);
    for (double& v : row) v /= std::sqrt(static_cast<double>(q));
  }

  const int min_clusters = shape.n_min >= 16 ? 2 : 1;
  const int maj_clusters = shape.n_maj >= 120 ? 3 : 2;
  std::vector<double> separation = gaussian_vec(q, rng);
  double norm = 0.0;
  for (const double v : separation) norm += v * v;
  for (double& v : separation) v *= 1.8 / std::sqrt(norm);

  std::vector<std::vector<double>> min_centers, maj_centers;
  for (int c = 0; c < min_clusters; ++c) {
    std::vector<double> center = gaussian_vec(q, rng);
    for (double& v : center) v *= 0.9;
    min_centers.push_back(std::move(center));
  }
  for (int c = 0; c < maj_clusters; ++c) {
    std::vector<double> center = gaussian_vec(q, rng);
    for (std::size_t i = 0; i < q; ++i) center[i] = center[i] * 0.9 + separation[i];
    maj_centers.push_back(std::move(center));
  }

  const auto draw_point = [&](const std::vector<std::vector<double>>& centers) {
    const std::vector<double>& center = centers[rng.index(centers.size())];
    std::vector<double> z(q);
    for (std::size_t i = 0; i < q; ++i) z[i] = center[i] + 0.45 * rng.gaussian();
    std::vector<double> x(d);
    for (std::size_t j = 0; j < d; ++j) {
      double acc = 0.18 * rng.gaussian();
      for (std::size_t i = 0; i < q; ++i) acc += loading[j][i] * z[i];
      x[j] = acc;
    }
    return x;
  };

  std::vector<std::vector<double>> raw;
  std::vector<std::uint8_t> labels;
  for (int i = 0; i < shape.n_min; ++i) {
    raw.push_back(draw_point(min_centers));
    labels.push_back(1);
  }
  for (int i = 0; i < shape.n_maj; ++i) {
    raw.push_back(draw_point(maj_centers));
    labels.push_back(0);
  }

  // Per-feature affine map into varied plausible ranges, rounded as a file
  // with a few decimals would be.
  for (std::size_t j = 0; j < d; ++j) {
    const double scale = rng.uniform(0.5, 30.0);
    const double offset = rng.uniform(-20.0, 20.0);
    for (auto& row : raw) row[j] = std::round((offset + scale * row[j]) * 1e4) / 1e4;
  }

  // Shuffle so classes interleave like a real export.
  std::vector<std::size_t> order(raw.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);

  dataio::Dataset ds;
  ds.positive_label = "positive";
  ds.negative_label = "negative";
  for (std::size_t j = 0; j < d; ++j) {
    dataio::FeatureSpec spec;
    spec.name = "f" + std::to_string(j + 1);
    if (j < static_cast<std::size_t>(shape.n_categorical)) {
      spec.kind = dataio::FeatureKind::categorical;
      spec.categories = {"a", "b", "c"};
    } else {
      spec.kind = dataio::FeatureKind::numeric;
    }
    ds.schema.push_back(std::move(spec));
  }

  // Tertile cut points for the discretized features.
  std::vector<std::pair<double, double>> cuts(static_cast<std::size_t>(shape.n_categorical));
  for (std::size_t j = 0; j < cuts.size(); ++j) {
    std::vector<double> col;
    col.reserve(raw.size());
    for (const auto& row : raw) col.push_back(row[j]);
    std::sort(col.begin(), col.end());
    cuts[j] = {col[col.size() / 3], col[2 * col.size() / 3]};
  }

  for (const std::size_t i : order) {
    dataio::Row row(d);
    for (std::size_t j = 0; j < d; ++j) {
      if (j < cuts.size()) {
        row[j] = raw[i][j] < cuts[j].first ? 0.0 : (raw[i][j] < cuts[j].second ? 1.0 : 2.0);
      } else {
        row[j] = raw[i][j];
      }
    }
    ds.rows.push_back(std::move(row));
    ds.labels.push_back(labels[i]);
  }
  return ds;
}

std::string to_keel(const dataio::Dataset& ds, const std::string& relation) {
  std::string out = "@relation " + relation + "\n";
  for (std::size_t j = 0; j < ds.schema.size(); ++j) {
    const dataio::FeatureSpec& f = ds.schema[j];
    if (f.kind == dataio::FeatureKind::numeric) {
      double lo = ds.rows.empty() ? 0.0 : ds.rows[0][j];
      double hi = lo;
      for (const dataio::Row& row : ds.rows) {
        lo = std::min(lo, row[j]);
        hi = std::max(hi, row[j]);
      }
      char buf[96];
      std::snprintf(buf, sizeof buf, "@attribute %s real [%.4f, %.4f]\n", f.name.c_str(), lo, hi);
      out += buf;
    } else {
      out += "@attribute " + f.name + " {";
      for (std::size_t c = 0; c < f.categories.size(); ++c) {
        if (c) out += ", ";
        out += f.categories[c];
      }
      out += "}\n";
    }
  }
  out += "@attribute Class {" + ds.positive_label + ", " + ds.negative_label + "}\n";
  out += "@inputs ";
  for (std::size_t j = 0; j < ds.schema.size(); ++j) {
    if (j) out += ", ";
    out += ds.schema[j].name;
  }
  out += "\n@outputs Class\n@data\n";
  for (std::size_t i = 0; i < ds.rows.size(); ++i) {
    const std::vector<std::string> cells = dataio::format_row(ds.schema, ds.rows[i]);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      out += cells[j];
      out += ", ";
    }
    out += ds.labels[i] ? ds.positive_label : ds.negative_label;
    out += "\n";
  }
  return out;
}

std::vector<std::filesystem::path> write_benchmark_suite(const std::filesystem::path& dir,
                                                         std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  for (const DatasetShape& shape : benchmark_shapes()) {
    const dataio::Dataset ds = generate(shape, seed);
    const std::filesystem::path path = dir / (shape.name + ".dat");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << to_keel(ds, shape.name);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace semres::datagen
