#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"

namespace tabdar {

// Cells are kept verbatim; an empty field is a missing cell.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t num_rows() const { return rows.size(); }
  std::size_t num_columns() const { return header.size(); }
};

namespace csv {

namespace detail {

// Reads one record; returns false at end of input.
inline bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t line) {
  fields.clear();
  int c = in.get();
  if (c == EOF) return false;
  std::string field;
  bool quoted = false;
  bool after_quote = false;
  for (;; c = in.get()) {
    if (quoted) {
      if (c == EOF) throw ParseError("unterminated quoted field starting near line " + std::to_string(line));
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        field.push_back(static_cast<char>(c));
      }
      continue;
    }
    if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      after_quote = false;
    } else if (c == '\n' || c == EOF) {
      if (!field.empty() && field.back() == '\r' && !after_quote) field.pop_back();
      fields.push_back(std::move(field));
      return true;
    } else if (c == '"' && field.empty() && !after_quote) {
      quoted = true;
    } else if (c == '\r' && after_quote) {
      // CR of a CRLF following a closing quote
    } else {
      if (after_quote) throw ParseError("unexpected character after closing quote at line " + std::to_string(line));
      field.push_back(static_cast<char>(c));
    }
  }
}

inline bool needs_quotes(const std::string& s) {
  return s.find_first_of(",\"\r\n") != std::string::npos;
}

}  // namespace detail

inline RawTable read(std::istream& in) {
  RawTable table;
  std::vector<std::string> fields;
  std::size_t line = 1;
  if (!detail::read_record(in, table.header, line)) throw ParseError("empty CSV: missing header row");
  if (table.header.size() == 1 && table.header[0].empty()) throw ParseError("empty CSV: blank header row");
  while (detail::read_record(in, fields, ++line)) {
    if (fields.size() == 1 && fields[0].empty() && in.peek() == EOF) break;  // trailing blank line
    if (fields.size() != table.header.size()) {
      throw ParseError("row " + std::to_string(table.rows.size() + 1) + " (line " + std::to_string(line) + ") has " +
                       std::to_string(fields.size()) + " fields, expected " + std::to_string(table.header.size()));
    }
    table.rows.push_back(fields);
  }
  return table;
}

inline RawTable read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return read(in);
}

inline RawTable parse(const std::string& text) {
  std::istringstream in(text);
  return read(in);
}

inline void write_record(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    if (detail::needs_quotes(fields[i])) {
      out << '"';
      for (char ch : fields[i]) {
        if (ch == '"') out << '"';
        out << ch;
      }
      out << '"';
    } else {
      out << fields[i];
    }
  }
  out << '\n';
}

inline void write(std::ostream& out, const RawTable& table) {
  write_record(out, table.header);
  for (const auto& row : table.rows) write_record(out, row);
}

inline void write_file(const std::string& path, const RawTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path);
  write(out, table);
}

}  // namespace csv
}  // namespace tabdar
