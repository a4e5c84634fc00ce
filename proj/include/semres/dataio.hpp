#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "semres/matrix.hpp"

namespace semres::dataio {

enum class FeatureKind { numeric, categorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  std::vector<std::string> categories;  // categorical only, declaration order
  double min = 0.0;                     // numeric only, fitted
  double max = 0.0;
};

// One record. Numeric cells hold the value; categorical cells hold the index
// into the feature's category list.
using Row = std::vector<double>;

struct Dataset {
  std::vector<FeatureSpec> schema;
  std::vector<Row> rows;
  std::vector<std::uint8_t> labels;  // 1 = positive / minority class
  std::string positive_label;
  std::string negative_label;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_features() const { return schema.size(); }
};

struct ColumnOrigin {
  std::size_t feature;  // index into the schema
  int category;         // one-hot category index, -1 for numeric columns
};

struct EncodedMatrix {
  nn::Matrix values;
  std::vector<ColumnOrigin> column_map;
};

// Fitted preprocessing state: a schema copy whose numeric min/max fields are
// filled. encode/decode round-trip exactly on rows inside the fitted ranges.
struct Normalizer {
  std::vector<FeatureSpec> features;

  std::size_t encoded_width() const;
  bool empty() const { return features.empty(); }
};

struct FoldPlan {
  int k = 0;
  std::vector<int> assignments;  // fold index per row
};

struct ClassStats {
  std::size_t n_min = 0;
  std::size_t n_maj = 0;
  double imbalance_ratio = 0.0;
};

// Parses a KEEL .dat file. The class attribute comes from @outputs when
// present, otherwise the last attribute; it must be categorical with exactly
// two labels appearing in the data. The minority label becomes the positive
// class; ties break by declaration order. Missing values ('?') are rejected.
Dataset parse_keel(const std::string& text);

// Parses a CSV file (RFC 4180 subset: header required, double quotes
// supported, no embedded newlines). The class column is `class_column` when
// non-empty, else a column literally named "class" (case-insensitive), else
// the last column. A column is numeric iff every value parses as a number.
Dataset parse_csv(const std::string& text, const std::string& positive_label,
                  const std::string& class_column = "");

// Fits the normalizer on `rows` (min/max per numeric feature) and encodes
// them: one-hot per categorical feature, (v - min) / (max - min) per numeric
// feature, constant features mapping to 0.
std::pair<EncodedMatrix, Normalizer> fit_encode(const std::vector<Row>& rows,
                                                const std::vector<FeatureSpec>& schema);

// Encodes rows with an already-fitted normalizer. Numeric values outside the
// fitted range are allowed and map outside [0,1].
EncodedMatrix encode(const std::vector<Row>& rows, const Normalizer& norm);

// Inverse transform: numeric columns are clamped to [0,1] then inverse
// scaled; one-hot groups decode by argmax (first index on ties).
std::vector<Row> decode(const nn::Matrix& values, const Normalizer& norm);

ClassStats class_stats(const Dataset& ds);

// Deterministic stratified k-fold assignment; per-class fold sizes differ by
// at most one. Each class must have at least k members.
FoldPlan stratified_kfold(const Dataset& ds, int k, std::uint64_t seed);

// Canonical fingerprint of a schema (names, kinds, categories, labels),
// used to detect checkpoint/dataset mismatches.
std::string schema_fingerprint(const std::vector<FeatureSpec>& schema);

// Renders a row's cells as strings (category labels for categorical cells).
std::vector<std::string> format_row(const std::vector<FeatureSpec>& schema, const Row& row);

}  // namespace semres::dataio
