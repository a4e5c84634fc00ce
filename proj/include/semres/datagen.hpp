#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "semres/dataio.hpp"

namespace semres::datagen {

// Shape of one synthetic benchmark dataset: row counts per class, feature
// count, and how many leading features are discretized into categories.
struct DatasetShape {
  std::string name;
  int features = 2;
  int n_min = 10;
  int n_maj = 20;
  int n_categorical = 0;
};

// The 20 stock shapes used by the evaluation harness and tests. Names and
// (rows, features, minority, majority) counts follow the common KEEL
// imbalanced-benchmark suite; the generated values themselves are synthetic.
const std::vector<DatasetShape>& benchmark_shapes();

const DatasetShape& shape_by_name(const std::string& name);

// Draws a class-conditional latent-factor mixture: correlated numeric
// features from per-class Gaussian clusters with partial overlap, optionally
// discretizing the leading features into 3-level categories. Deterministic
// in (shape, seed).
dataio::Dataset generate(const DatasetShape& shape, std::uint64_t seed);

// Renders a dataset in KEEL .dat form (@relation/@attribute/@inputs/
// @outputs/@data).
std::string to_keel(const dataio::Dataset& ds, const std::string& relation);

// Writes <name>.dat for every stock shape into dir; returns the file paths.
std::vector<std::filesystem::path> write_benchmark_suite(const std::filesystem::path& dir,
                                                         std::uint64_t seed = 7);

}  // namespace semres::datagen
