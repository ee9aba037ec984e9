#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "common.hpp"

namespace tabdar {

enum class ColumnType { Continuous, Categorical };

inline constexpr const char* kMissingCategory = "__missing__";

struct ColumnSpec {
  std::string name;
  ColumnType type = ColumnType::Continuous;
  // Categorical only. Sorted lexicographically, sentinel (if any) last.
  std::vector<std::string> vocabulary;

  bool is_continuous() const { return type == ColumnType::Continuous; }
  bool is_categorical() const { return type == ColumnType::Categorical; }
  std::size_t cardinality() const { return vocabulary.size(); }
};

struct TableSchema {
  std::vector<ColumnSpec> columns;

  std::size_t size() const { return columns.size(); }
  const ColumnSpec& operator[](std::size_t i) const { return columns[i]; }
  ColumnSpec& operator[](std::size_t i) { return columns[i]; }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t num_continuous() const {
    return static_cast<std::size_t>(
        std::count_if(columns.begin(), columns.end(), [](const ColumnSpec& c) { return c.is_continuous(); }));
  }
  std::size_t num_categorical() const { return size() - num_continuous(); }

  void validate() const {
    if (columns.empty()) throw SchemaError("schema has no columns");
    std::unordered_set<std::string> names;
    for (const auto& c : columns) {
      if (!names.insert(c.name).second) throw SchemaError("duplicate column name '" + c.name + "'");
      if (c.is_categorical()) {
        if (c.vocabulary.empty()) throw SchemaError("categorical column '" + c.name + "' has an empty vocabulary");
        std::unordered_set<std::string> seen;
        for (const auto& v : c.vocabulary)
          if (!seen.insert(v).second) throw SchemaError("duplicate category '" + v + "' in column '" + c.name + "'");
      }
    }
  }

  bool operator==(const TableSchema& o) const {
    if (columns.size() != o.columns.size()) return false;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      const auto &a = columns[i], &b = o.columns[i];
      if (a.name != b.name || a.type != b.type || a.vocabulary != b.vocabulary) return false;
    }
    return true;
  }
};

inline nlohmann::json to_json(const TableSchema& schema) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : schema.columns) {
    nlohmann::json j;
    j["name"] = c.name;
    j["kind"] = c.is_continuous() ? "continuous" : "categorical";
    if (c.is_categorical()) j["vocabulary"] = c.vocabulary;
    cols.push_back(std::move(j));
  }
  return nlohmann::json{{"columns", std::move(cols)}};
}

// Vocabulary is optional when parsing: a schema file used as an override
// may only pin column kinds.
inline TableSchema schema_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("columns") || !j["columns"].is_array())
    throw ParseError("schema JSON must be an object with a \"columns\" array");
  TableSchema schema;
  for (const auto& c : j["columns"]) {
    ColumnSpec spec;
    if (!c.contains("name") || !c["name"].is_string()) throw ParseError("schema column without a string \"name\"");
    spec.name = c["name"].get<std::string>();
    const std::string kind = c.value("kind", "");
    if (kind == "continuous") {
      spec.type = ColumnType::Continuous;
    } else if (kind == "categorical") {
      spec.type = ColumnType::Categorical;
      if (c.contains("vocabulary")) spec.vocabulary = c["vocabulary"].get<std::vector<std::string>>();
    } else {
      throw ParseError("column '" + spec.name + "': kind must be \"continuous\" or \"categorical\"");
    }
    schema.columns.push_back(std::move(spec));
  }
  return schema;
}

}  // namespace tabdar
