#pragma once

// Table serialization: CSV with '#'-prefixed metadata lines, and a JSON
// mirror of the same content. Doubles are printed with 17 significant
// digits, which round-trips exactly.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace coalld::io {

struct Table {
  std::string name;
  std::vector<std::string> columns;          // numeric columns
  std::vector<std::string> row_labels;       // optional label column
  std::string label_column;                  // its header when present
  std::vector<std::vector<double>> rows;
};

using Metadata = std::vector<std::pair<std::string, std::string>>;

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_csv(std::ostream& os, const Table& t, const Metadata& meta) {
  for (const auto& [k, v] : meta) {
    os << "# " << k << "=" << v << "\n";
  }
  const bool labeled = !t.row_labels.empty();
  if (labeled) os << t.label_column;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (labeled || c > 0) os << ",";
    os << t.columns[c];
  }
  os << "\n";
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (labeled) os << t.row_labels[r];
    for (std::size_t c = 0; c < t.rows[r].size(); ++c) {
      if (labeled || c > 0) os << ",";
      os << format_double(t.rows[r][c]);
    }
    os << "\n";
  }
}

inline void write_json(std::ostream& os, const Table& t, const Metadata& meta) {
  nlohmann::json j;
  j["table"] = t.name;
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [k, v] : meta) m[k] = v;
  j["metadata"] = m;
  nlohmann::json rows = nlohmann::json::array();
  const bool labeled = !t.row_labels.empty();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    nlohmann::json row = nlohmann::json::object();
    if (labeled) row[t.label_column] = t.row_labels[r];
    for (std::size_t c = 0; c < t.rows[r].size(); ++c) {
      const double v = t.rows[r][c];
      if (std::isnan(v) || std::isinf(v)) {
        row[t.columns[c]] = format_double(v);  // JSON has no inf/nan literals
      } else {
        row[t.columns[c]] = v;
      }
    }
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  os << j.dump(1) << "\n";
}

}  // namespace coalld::io
