#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "common.hpp"
#include "csv.hpp"
#include "normal.hpp"
#include "schema.hpp"

namespace tabdar {

inline constexpr std::size_t kContinuousDistinctThreshold = 20;
inline constexpr std::size_t kMaxQuantiles = 1000;

inline std::optional<double> parse_real(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

// Shortest representation that parses back to the same double.
inline std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Empirical quantiles mapped through the standard-normal inverse CDF, then
// scaled to variance 0.5. Mirrors the common QuantileTransformer recipe
// (linear percentiles, forward/backward interpolation average, 1e-7 clip).
struct QuantileTransform {
  static constexpr double kScale = 0.70710678118654752440;  // sqrt(0.5)
  static constexpr double kBoundsThreshold = 1e-7;

  std::vector<double> quantiles;
  std::vector<double> references;
  double fill_value = 0.0;  // column mean, substituted for missing cells

  bool degenerate() const { return quantiles.size() < 2 || quantiles.front() == quantiles.back(); }

  double encode(double x) const {
    if (degenerate()) return 0.0;
    double u;
    if (x - kBoundsThreshold < quantiles.front()) {
      u = 0.0;
    } else if (x + kBoundsThreshold > quantiles.back()) {
      u = 1.0;
    } else {
      // averaging ascending and descending interpolation centres ties
      const double up = interp(x, quantiles, references);
      const double down = interp_descending(x);
      u = 0.5 * (up + down);
    }
    const double clip = normal::quantile(1.0 - (kBoundsThreshold - std::numeric_limits<double>::epsilon()));
    const double z = std::clamp(normal::quantile(u), -clip, clip);
    return z * kScale;
  }

  double decode(double y) const {
    if (quantiles.empty()) return fill_value;
    if (degenerate()) return quantiles.front();
    const double u = std::clamp(normal::cdf(y / kScale), 0.0, 1.0);
    return interp(u, references, quantiles);
  }

  // np.interp semantics: xp non-decreasing, clamps outside the range.
  static double interp(double x, const std::vector<double>& xp, const std::vector<double>& fp) {
    if (x <= xp.front()) return fp.front();
    if (x >= xp.back()) return fp.back();
    const auto it = std::upper_bound(xp.begin(), xp.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - xp.begin()) - 1;
    const double t = (x - xp[j]) / (xp[j + 1] - xp[j]);
    return fp[j] + t * (fp[j + 1] - fp[j]);
  }

 private:
  // -interp(-x, -quantiles[::-1], -references[::-1]): interpolates from the
  // first knot >= x instead of the last knot <= x. Requires q0 < x < qN.
  double interp_descending(double x) const {
    const auto it = std::lower_bound(quantiles.begin(), quantiles.end(), x);
    const auto i = static_cast<std::size_t>(it - quantiles.begin());
    const double t = (quantiles[i] - x) / (quantiles[i] - quantiles[i - 1]);
    return references[i] - t * (references[i] - references[i - 1]);
  }
};

struct OrdinalTransform {
  std::vector<std::string> vocabulary;
  std::unordered_map<std::string, std::size_t> index;

  explicit OrdinalTransform(std::vector<std::string> vocab = {}) : vocabulary(std::move(vocab)) {
    for (std::size_t i = 0; i < vocabulary.size(); ++i) index.emplace(vocabulary[i], i);
  }

  std::size_t cardinality() const { return vocabulary.size(); }

  std::optional<std::size_t> find(const std::string& value) const {
    auto it = index.find(value);
    if (it == index.end()) return std::nullopt;
    return it->second;
  }

  // The missing sentinel decodes to an empty (missing) cell.
  std::string decode(std::size_t i) const {
    if (i >= vocabulary.size())
      throw SchemaError("category index " + std::to_string(i) + " out of range for vocabulary of size " +
                        std::to_string(vocabulary.size()));
    return vocabulary[i] == kMissingCategory ? std::string() : vocabulary[i];
  }
};

using ColumnTransform = std::variant<QuantileTransform, OrdinalTransform>;

struct EncodedTable {
  TableSchema schema;
  std::vector<ColumnTransform> transforms;
  Mat<double> values;  // N x D; categorical cells hold integer indices

  std::size_t num_rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t num_columns() const { return schema.size(); }
};

// Column kind overrides, usually from a schema JSON file. Overrides may
// carry a vocabulary; otherwise it is inferred from the data.
using SchemaOverrides = std::map<std::string, ColumnSpec>;

inline SchemaOverrides overrides_from_schema(const TableSchema& schema) {
  SchemaOverrides out;
  for (const auto& c : schema.columns) out.emplace(c.name, c);
  return out;
}

inline TableSchema infer_schema(const RawTable& raw, const SchemaOverrides& overrides = {}) {
  if (raw.num_columns() == 0) throw ParseError("table has no columns");
  if (raw.num_rows() == 0) throw ParseError("table has no data rows");
  for (const auto& [name, spec] : overrides) {
    if (std::find(raw.header.begin(), raw.header.end(), name) == raw.header.end())
      throw SchemaError("schema override names unknown column '" + name + "'");
  }
  TableSchema schema;
  for (std::size_t j = 0; j < raw.num_columns(); ++j) {
    ColumnSpec spec;
    spec.name = raw.header[j];
    std::set<std::string> distinct;
    bool numeric = true;
    bool has_missing = false;
    for (const auto& row : raw.rows) {
      const std::string& cell = row[j];
      if (cell.empty()) {
        has_missing = true;
        continue;
      }
      distinct.insert(cell);
      if (numeric && !parse_real(cell)) numeric = false;
    }
    std::optional<ColumnSpec> override_spec;
    if (auto it = overrides.find(spec.name); it != overrides.end()) override_spec = it->second;
    if (override_spec) {
      spec.type = override_spec->type;
    } else {
      spec.type = (numeric && distinct.size() > kContinuousDistinctThreshold) ? ColumnType::Continuous
                                                                             : ColumnType::Categorical;
    }
    if (spec.is_categorical()) {
      if (override_spec && !override_spec->vocabulary.empty()) {
        spec.vocabulary = override_spec->vocabulary;
      } else {
        spec.vocabulary.assign(distinct.begin(), distinct.end());
        if (has_missing) spec.vocabulary.emplace_back(kMissingCategory);
      }
    } else {
      for (const auto& cell : distinct)
        if (!parse_real(cell)) throw SchemaError("column '" + spec.name + "' is continuous but holds '" + cell + "'");
    }
    schema.columns.push_back(std::move(spec));
  }
  schema.validate();
  return schema;
}

inline std::pair<RawTable, TableSchema> load_csv(const std::string& path, const SchemaOverrides& overrides = {}) {
  RawTable raw = csv::read_file(path);
  TableSchema schema = infer_schema(raw, overrides);
  return {std::move(raw), std::move(schema)};
}

namespace detail {

inline void check_header(const RawTable& raw, const TableSchema& schema) {
  if (raw.num_columns() != schema.size()) throw SchemaError("table column count does not match schema");
  for (std::size_t j = 0; j < schema.size(); ++j)
    if (raw.header[j] != schema[j].name)
      throw SchemaError("column " + std::to_string(j) + " is '" + raw.header[j] + "', schema expects '" +
                        schema[j].name + "'");
}

inline double parse_cell(const std::string& cell, const ColumnSpec& col) {
  auto v = parse_real(cell);
  if (!v) throw SchemaError("column '" + col.name + "': '" + cell + "' is not a real number");
  return *v;
}

// Linear-interpolated percentile of sorted data at fraction p.
inline double percentile_sorted(const std::vector<double>& sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace detail

inline QuantileTransform fit_quantile_transform(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  QuantileTransform t;
  const std::size_t n_q = std::min(kMaxQuantiles, values.size());
  t.quantiles.resize(n_q);
  t.references.resize(n_q);
  for (std::size_t i = 0; i < n_q; ++i) {
    t.references[i] = n_q == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n_q - 1);
    t.quantiles[i] = detail::percentile_sorted(values, t.references[i]);
  }
  // percentile interpolation can break monotonicity by one ulp
  for (std::size_t i = 1; i < n_q; ++i) t.quantiles[i] = std::max(t.quantiles[i], t.quantiles[i - 1]);
  return t;
}

inline std::vector<ColumnTransform> fit_transforms(const RawTable& raw, const TableSchema& schema) {
  detail::check_header(raw, schema);
  if (raw.num_rows() == 0) throw SchemaError("cannot fit transforms on an empty table");
  std::vector<ColumnTransform> out;
  out.reserve(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    const ColumnSpec& col = schema[j];
    if (col.is_categorical()) {
      OrdinalTransform t(col.vocabulary);
      for (const auto& row : raw.rows) {
        const std::string& cell = row[j].empty() ? std::string(kMissingCategory) : row[j];
        if (!t.find(cell))
          throw SchemaError("column '" + col.name + "': value '" + cell + "' not in schema vocabulary");
      }
      out.emplace_back(std::move(t));
      continue;
    }
    std::vector<double> observed;
    observed.reserve(raw.num_rows());
    for (const auto& row : raw.rows)
      if (!row[j].empty()) observed.push_back(detail::parse_cell(row[j], col));
    if (observed.empty()) throw SchemaError("continuous column '" + col.name + "' has no observed values");
    double sum = 0.0;
    for (double v : observed) sum += v;
    const double mean = sum / static_cast<double>(observed.size());
    std::vector<double> filled = observed;
    filled.resize(raw.num_rows(), mean);
    QuantileTransform t = fit_quantile_transform(std::move(filled));
    t.fill_value = mean;
    out.emplace_back(std::move(t));
  }
  return out;
}

// Encodes one cell. Missing continuous cells take the fitted mean; missing
// categorical cells take the sentinel when the vocabulary has one.
inline double encode_cell(const std::string& cell, const ColumnSpec& col, const ColumnTransform& transform) {
  if (const auto* q = std::get_if<QuantileTransform>(&transform)) {
    return q->encode(cell.empty() ? q->fill_value : detail::parse_cell(cell, col));
  }
  const auto& o = std::get<OrdinalTransform>(transform);
  const std::string& key = cell.empty() ? std::string(kMissingCategory) : cell;
  auto idx = o.find(key);
  if (!idx) {
    if (cell.empty()) throw SchemaError("column '" + col.name + "' has a missing cell but no missing category");
    throw SchemaError("column '" + col.name + "': unseen category '" + cell + "'");
  }
  return static_cast<double>(*idx);
}

inline EncodedTable encode(const RawTable& raw, const TableSchema& schema,
                           const std::vector<ColumnTransform>& transforms) {
  detail::check_header(raw, schema);
  if (transforms.size() != schema.size()) throw SchemaError("transform count does not match schema");
  EncodedTable out{schema, transforms, Mat<double>(static_cast<Eigen::Index>(raw.num_rows()),
                                                   static_cast<Eigen::Index>(schema.size()))};
  for (std::size_t r = 0; r < raw.num_rows(); ++r)
    for (std::size_t j = 0; j < schema.size(); ++j)
      out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          encode_cell(raw.rows[r][j], schema[j], transforms[j]);
  return out;
}

// Encoding for conditional generation: empty cells are targets rather than
// missing values. Returns the encoded matrix (targets hold 0) and the mask
// (1 = to generate).
struct PartialEncoding {
  Mat<double> values;
  Mat<std::uint8_t> targets;
};

inline PartialEncoding encode_partial(const RawTable& raw, const TableSchema& schema,
                                      const std::vector<ColumnTransform>& transforms) {
  detail::check_header(raw, schema);
  const auto n = static_cast<Eigen::Index>(raw.num_rows());
  const auto d = static_cast<Eigen::Index>(schema.size());
  PartialEncoding out{Mat<double>::Zero(n, d), Mat<std::uint8_t>::Zero(n, d)};
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const std::string& cell = raw.rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
      if (cell.empty()) {
        out.targets(r, j) = 1;
      } else {
        out.values(r, j) = encode_cell(cell, schema[static_cast<std::size_t>(j)], transforms[static_cast<std::size_t>(j)]);
      }
    }
  }
  return out;
}

inline std::string decode_cell(double value, const ColumnTransform& transform) {
  if (const auto* q = std::get_if<QuantileTransform>(&transform)) return format_real(q->decode(value));
  const auto& o = std::get<OrdinalTransform>(transform);
  if (!(value >= 0.0)) throw SchemaError("negative category index");
  return o.decode(static_cast<std::size_t>(std::llround(value)));
}

inline std::vector<std::string> decode_row(std::span<const double> row, const std::vector<ColumnTransform>& transforms) {
  if (row.size() != transforms.size()) throw SchemaError("row width does not match transforms");
  std::vector<std::string> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = decode_cell(row[j], transforms[j]);
  return out;
}

inline RawTable decode(const Mat<double>& values, const TableSchema& schema,
                       const std::vector<ColumnTransform>& transforms) {
  RawTable out;
  for (const auto& c : schema.columns) out.header.push_back(c.name);
  out.rows.reserve(static_cast<std::size_t>(values.rows()));
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    std::vector<double> row(values.row(r).data(), values.row(r).data() + values.cols());
    out.rows.push_back(decode_row(row, transforms));
  }
  return out;
}

// ---- serialization of fitted transforms ----

inline nlohmann::json to_json(const ColumnTransform& t) {
  if (const auto* q = std::get_if<QuantileTransform>(&t)) {
    return {{"type", "quantile"}, {"quantiles", q->quantiles}, {"references", q->references}, {"fill_value", q->fill_value}};
  }
  return {{"type", "ordinal"}, {"vocabulary", std::get<OrdinalTransform>(t).vocabulary}};
}

inline ColumnTransform transform_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "quantile") {
    QuantileTransform q;
    q.quantiles = j.at("quantiles").get<std::vector<double>>();
    q.references = j.at("references").get<std::vector<double>>();
    q.fill_value = j.at("fill_value").get<double>();
    if (q.quantiles.size() != q.references.size()) throw ParseError("quantile transform knots mismatch");
    return q;
  }
  if (type == "ordinal") return OrdinalTransform(j.at("vocabulary").get<std::vector<std::string>>());
  throw ParseError("unknown transform type '" + type + "'");
}

}  // namespace tabdar
