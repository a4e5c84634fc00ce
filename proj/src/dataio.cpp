#include "semres/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "semres/rng.hpp"

namespace semres::dataio {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s) {
    if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

struct RawAttribute {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  std::vector<std::string> categories;
};

int category_index(const std::vector<std::string>& cats, const std::string& v) {
  for (std::size_t i = 0; i < cats.size(); ++i)
    if (cats[i] == v) return static_cast<int>(i);
  return -1;
}

// Builds the Dataset out of string cells once schema and class column are known.
Dataset assemble(const std::vector<RawAttribute>& attrs, std::size_t class_idx,
                 const std::vector<std::size_t>& feature_idx,
                 const std::vector<std::vector<std::string>>& cells,
                 const std::vector<std::size_t>& source_lines, const std::string& forced_positive) {
  const RawAttribute& cls = attrs[class_idx];

  Dataset ds;
  for (const std::size_t fi : feature_idx) {
    FeatureSpec spec;
    spec.name = attrs[fi].name;
    spec.kind = attrs[fi].kind;
    spec.categories = attrs[fi].categories;
    ds.schema.push_back(std::move(spec));
  }

  std::vector<std::string> labels_text;
  labels_text.reserve(cells.size());
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const auto& line_cells = cells[r];
    Row row;
    row.reserve(feature_idx.size());
    for (std::size_t c = 0; c < feature_idx.size(); ++c) {
      const std::string& cell = line_cells[feature_idx[c]];
      const FeatureSpec& spec = ds.schema[c];
      if (spec.kind == FeatureKind::numeric) {
        double v = 0.0;
        if (!parse_number(cell, v))
          throw std::runtime_error("line " + std::to_string(source_lines[r]) +
                                   ": cannot parse numeric value '" + cell + "' for attribute " +
                                   spec.name);
        row.push_back(v);
      } else {
        const int idx = category_index(spec.categories, cell);
        if (idx < 0)
          throw std::runtime_error("line " + std::to_string(source_lines[r]) + ": value '" + cell +
                                   "' is not a declared category of attribute " + spec.name);
        row.push_back(static_cast<double>(idx));
      }
    }
    ds.rows.push_back(std::move(row));
    labels_text.push_back(line_cells[class_idx]);
  }

  // Distinct labels in data order of first appearance.
  std::vector<std::string> distinct;
  for (const auto& l : labels_text)
    if (std::find(distinct.begin(), distinct.end(), l) == distinct.end()) distinct.push_back(l);
  if (distinct.size() > 2) throw std::runtime_error("more than two classes present; binary datasets only");
  if (distinct.size() < 2) throw std::runtime_error("only one class present in the data");

  const auto count_of = [&](const std::string& l) {
    return std::count(labels_text.begin(), labels_text.end(), l);
  };
  std::string positive;
  if (!forced_positive.empty()) {
    if (std::find(distinct.begin(), distinct.end(), forced_positive) == distinct.end())
      throw std::runtime_error("positive label '" + forced_positive + "' does not appear in the data");
    positive = forced_positive;
  } else {
    // Minority label; ties break by declaration order of the class attribute
    // (or first appearance when the class attribute has no declared list).
    std::vector<std::string> order = cls.categories.empty() ? distinct : cls.categories;
    long best = -1;
    for (const auto& cand : order) {
      if (std::find(distinct.begin(), distinct.end(), cand) == distinct.end()) continue;
      const long n = count_of(cand);
      if (best < 0 || n < best) {
        best = n;
        positive = cand;
      }
    }
  }
  const std::string negative = distinct[0] == positive ? distinct[1] : distinct[0];
  if (count_of(positive) > count_of(negative))
    throw std::runtime_error("positive label '" + positive + "' is not the minority class");

  ds.positive_label = positive;
  ds.negative_label = negative;
  ds.labels.reserve(labels_text.size());
  for (const auto& l : labels_text) ds.labels.push_back(l == positive ? 1 : 0);
  return ds;
}

}  // namespace

Dataset parse_keel(const std::string& text) {
  std::vector<RawAttribute> attrs;
  std::vector<std::string> inputs, outputs;
  std::vector<std::vector<std::string>> cells;
  std::vector<std::size_t> source_lines;
  bool in_data = false;

  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '%') continue;

    if (!in_data && line[0] == '@') {
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      tag = lower(tag);
      if (tag == "@relation") continue;
      if (tag == "@data") {
        in_data = true;
        continue;
      }
      if (tag == "@attribute") {
        std::string rest = trim(line.substr(tag.size()));
        if (rest.empty()) throw std::runtime_error("line " + std::to_string(line_no) + ": @attribute without a name");
        RawAttribute attr;
        std::size_t name_end = rest.find_first_of(" \t{");
        if (name_end == std::string::npos) {
          // Name only, no type: KEEL treats it as real.
          attr.name = rest;
          attrs.push_back(std::move(attr));
          continue;
        }
        attr.name = rest.substr(0, name_end);
        std::string type = trim(rest.substr(name_end));
        if (!type.empty() && type[0] == '{') {
          const std::size_t close = type.find('}');
          if (close == std::string::npos)
            throw std::runtime_error("line " + std::to_string(line_no) + ": unterminated category list");
          attr.kind = FeatureKind::categorical;
          attr.categories = split_commas(type.substr(1, close - 1));
          if (attr.categories.size() < 2)
            throw std::runtime_error("line " + std::to_string(line_no) +
                                     ": categorical attribute needs at least two categories");
        } else {
          const std::string t = lower(type.substr(0, type.find_first_of(" \t[")));
          if (t != "real" && t != "integer" && t != "numeric")
            throw std::runtime_error("line " + std::to_string(line_no) + ": unknown attribute type '" +
                                     type + "'");
          attr.kind = FeatureKind::numeric;
        }
        attrs.push_back(std::move(attr));
        continue;
      }
      if (tag == "@inputs" || tag == "@input") {
        inputs = split_commas(trim(line.substr(tag.size())));
        continue;
      }
      if (tag == "@outputs" || tag == "@output") {
        outputs = split_commas(trim(line.substr(tag.size())));
        continue;
      }
      throw std::runtime_error("line " + std::to_string(line_no) + ": unknown header directive " + tag);
    }

    if (!in_data)
      throw std::runtime_error("line " + std::to_string(line_no) + ": data row before @data section");

    std::vector<std::string> row = split_commas(line);
    if (row.size() != attrs.size())
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(attrs.size()) + " values, found " +
                               std::to_string(row.size()));
    for (const auto& cell : row)
      if (cell == "?")
        throw std::runtime_error("line " + std::to_string(line_no) + ": missing value ('?') not supported");
    cells.push_back(std::move(row));
    source_lines.push_back(line_no);
  }

  if (attrs.empty()) throw std::runtime_error("no @attribute declarations found");
  if (!in_data) throw std::runtime_error("no @data section found");
  if (cells.empty()) throw std::runtime_error("no data rows found");

  const auto attr_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < attrs.size(); ++i)
      if (attrs[i].name == name) return i;
    throw std::runtime_error("attribute '" + name + "' named in @inputs/@outputs is not declared");
  };

  std::size_t class_idx = attrs.size() - 1;
  if (!outputs.empty()) {
    if (outputs.size() != 1) throw std::runtime_error("exactly one @outputs attribute is supported");
    class_idx = attr_index(outputs[0]);
  }

  std::vector<std::size_t> feature_idx;
  if (!inputs.empty()) {
    for (const auto& name : inputs) {
      const std::size_t idx = attr_index(name);
      if (idx == class_idx) throw std::runtime_error("class attribute listed in @inputs");
      feature_idx.push_back(idx);
    }
  } else {
    for (std::size_t i = 0; i < attrs.size(); ++i)
      if (i != class_idx) feature_idx.push_back(i);
  }
  if (feature_idx.empty()) throw std::runtime_error("dataset has no input features");
  if (attrs[class_idx].kind != FeatureKind::categorical)
    throw std::runtime_error("class attribute must be categorical");

  return assemble(attrs, class_idx, feature_idx, cells, source_lines, "");
}

Dataset parse_csv(const std::string& text, const std::string& positive_label,
                  const std::string& class_column) {
  // RFC 4180 subset: quoted fields may contain commas and doubled quotes.
  const auto split_csv = [](const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            cur += '"';
            ++i;
          } else {
            quoted = false;
          }
        } else {
          cur += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        out.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    out.push_back(trim(cur));
    return out;
  };

  std::istringstream stream(text);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> cells;
  std::vector<std::size_t> source_lines;
  std::size_t line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> row = split_csv(line);
    if (header.empty()) {
      header = std::move(row);
      continue;
    }
    if (row.size() != header.size())
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(header.size()) + " values, found " +
                               std::to_string(row.size()));
    cells.push_back(std::move(row));
    source_lines.push_back(line_no);
  }
  if (header.empty()) throw std::runtime_error("empty CSV: no header row");
  if (cells.empty()) throw std::runtime_error("empty CSV: no data rows");

  std::size_t class_idx = header.size() - 1;
  if (!class_column.empty()) {
    const auto it = std::find(header.begin(), header.end(), class_column);
    if (it == header.end()) throw std::runtime_error("class column '" + class_column + "' not in header");
    class_idx = static_cast<std::size_t>(it - header.begin());
  } else {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (lower(header[i]) == "class") class_idx = i;
  }

  // Type inference: numeric iff every value parses as a number.
  std::vector<RawAttribute> attrs(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    attrs[c].name = header[c];
    bool all_numeric = true;
    for (const auto& row : cells) {
      double v;
      if (!parse_number(row[c], v)) {
        all_numeric = false;
        break;
      }
    }
    if (all_numeric && c != class_idx) {
      attrs[c].kind = FeatureKind::numeric;
    } else {
      attrs[c].kind = FeatureKind::categorical;
      for (const auto& row : cells)
        if (category_index(attrs[c].categories, row[c]) < 0) attrs[c].categories.push_back(row[c]);
      if (attrs[c].categories.size() < 2 && c != class_idx)
        throw std::runtime_error("column '" + header[c] + "' has a single distinct value");
    }
  }

  std::vector<std::size_t> feature_idx;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (i != class_idx) feature_idx.push_back(i);
  if (feature_idx.empty()) throw std::runtime_error("CSV has no feature columns");
  if (positive_label.empty()) throw std::runtime_error("positive label must be given for CSV input");

  return assemble(attrs, class_idx, feature_idx, cells, source_lines, positive_label);
}

std::size_t Normalizer::encoded_width() const {
  std::size_t d = 0;
  for (const FeatureSpec& f : features)
    d += f.kind == FeatureKind::numeric ? 1 : f.categories.size();
  return d;
}

namespace {

EncodedMatrix encode_with(const std::vector<Row>& rows, const std::vector<FeatureSpec>& schema) {
  std::size_t d = 0;
  std::vector<ColumnOrigin> column_map;
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (schema[f].kind == FeatureKind::numeric) {
      column_map.push_back({f, -1});
      ++d;
    } else {
      for (std::size_t c = 0; c < schema[f].categories.size(); ++c)
        column_map.push_back({f, static_cast<int>(c)});
      d += schema[f].categories.size();
    }
  }

  nn::Matrix values(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != schema.size())
      throw std::invalid_argument("encode: row arity does not match schema");
    std::size_t col = 0;
    for (std::size_t f = 0; f < schema.size(); ++f) {
      const FeatureSpec& spec = schema[f];
      if (spec.kind == FeatureKind::numeric) {
        const double span = spec.max - spec.min;
        values(r, col) = span > 0.0 ? (rows[r][f] - spec.min) / span : 0.0;
        ++col;
      } else {
        const double idx_d = rows[r][f];
        const long idx = std::lround(idx_d);
        if (idx < 0 || static_cast<std::size_t>(idx) >= spec.categories.size() ||
            idx_d != static_cast<double>(idx))
          throw std::invalid_argument("encode: row " + std::to_string(r) +
                                      " holds a category outside the schema for feature " + spec.name);
        for (std::size_t c = 0; c < spec.categories.size(); ++c)
          values(r, col + c) = c == static_cast<std::size_t>(idx) ? 1.0 : 0.0;
        col += spec.categories.size();
      }
    }
  }
  return {std::move(values), std::move(column_map)};
}

}  // namespace

std::pair<EncodedMatrix, Normalizer> fit_encode(const std::vector<Row>& rows,
                                                const std::vector<FeatureSpec>& schema) {
  if (rows.empty()) throw std::invalid_argument("fit_encode: no rows to fit on");
  Normalizer norm;
  norm.features = schema;
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (schema[f].kind != FeatureKind::numeric) continue;
    double lo = rows[0][f], hi = rows[0][f];
    for (const Row& row : rows) {
      if (row.size() != schema.size()) throw std::invalid_argument("fit_encode: row arity mismatch");
      lo = std::min(lo, row[f]);
      hi = std::max(hi, row[f]);
    }
    norm.features[f].min = lo;
    norm.features[f].max = hi;
  }
  return {encode_with(rows, norm.features), std::move(norm)};
}

EncodedMatrix encode(const std::vector<Row>& rows, const Normalizer& norm) {
  return encode_with(rows, norm.features);
}

std::vector<Row> decode(const nn::Matrix& values, const Normalizer& norm) {
  if (values.cols() != norm.encoded_width())
    throw std::invalid_argument("decode: matrix width " + std::to_string(values.cols()) +
                                " does not match encoded width " +
                                std::to_string(norm.encoded_width()));
  std::vector<Row> rows(values.rows());
  for (std::size_t r = 0; r < values.rows(); ++r) {
    Row row;
    row.reserve(norm.features.size());
    std::size_t col = 0;
    for (const FeatureSpec& spec : norm.features) {
      if (spec.kind == FeatureKind::numeric) {
        const double x = std::clamp(values(r, col), 0.0, 1.0);
        row.push_back(spec.min + x * (spec.max - spec.min));
        ++col;
      } else {
        std::size_t best = 0;
        for (std::size_t c = 1; c < spec.categories.size(); ++c)
          if (values(r, col + c) > values(r, col + best)) best = c;
        row.push_back(static_cast<double>(best));
        col += spec.categories.size();
      }
    }
    rows[r] = std::move(row);
  }
  return rows;
}

ClassStats class_stats(const Dataset& ds) {
  ClassStats st;
  for (const auto l : ds.labels) (l ? st.n_min : st.n_maj)++;
  st.imbalance_ratio = st.n_min ? static_cast<double>(st.n_maj) / static_cast<double>(st.n_min) : 0.0;
  return st;
}

FoldPlan stratified_kfold(const Dataset& ds, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be at least 2");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < ds.labels.size(); ++i) (ds.labels[i] ? pos : neg).push_back(i);
  if (pos.size() < static_cast<std::size_t>(k) || neg.size() < static_cast<std::size_t>(k))
    throw std::invalid_argument("stratified_kfold: a class has fewer than k=" + std::to_string(k) +
                                " members");

  FoldPlan plan;
  plan.k = k;
  plan.assignments.assign(ds.n_rows(), 0);
  Rng rng(Rng::derive(seed, "stratified_kfold"));
  for (auto* cls : {&pos, &neg}) {
    // Fisher-Yates, then deal members out round-robin.
    for (std::size_t i = cls->size(); i > 1; --i) {
      const std::size_t j = rng.index(i);
      std::swap((*cls)[i - 1], (*cls)[j]);
    }
    for (std::size_t i = 0; i < cls->size(); ++i)
      plan.assignments[(*cls)[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return plan;
}

std::string schema_fingerprint(const std::vector<FeatureSpec>& schema) {
  std::string desc;
  for (const FeatureSpec& f : schema) {
    desc += f.name;
    desc += f.kind == FeatureKind::numeric ? ":n;" : ":c[";
    if (f.kind == FeatureKind::categorical) {
      for (const auto& c : f.categories) {
        desc += c;
        desc += ',';
      }
      desc += "];";
    }
  }
  std::uint64_t h = 1469598103934665603ull;
  for (const char c : desc) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::string> format_row(const std::vector<FeatureSpec>& schema, const Row& row) {
  if (row.size() != schema.size()) throw std::invalid_argument("format_row: arity mismatch");
  std::vector<std::string> out;
  out.reserve(row.size());
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (schema[f].kind == FeatureKind::categorical) {
      out.push_back(schema[f].categories.at(static_cast<std::size_t>(std::lround(row[f]))));
    } else {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.10g", row[f]);
      out.emplace_back(buf);
    }
  }
  return out;
}

}  // namespace semres::dataio
