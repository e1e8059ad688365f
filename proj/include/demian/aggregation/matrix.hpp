#pragma once

// Condition x task success-rate grid, persisted as CSV: header row of column
// ids, first column of condition ids, optional leading "# key: value"
// metadata lines, empty cells for missing values.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "demian/aggregation/rounding.hpp"
#include "demian/error.hpp"

namespace demian {

enum class Suite { unspecified, robocasa_dev, robocasa_test, molmospaces };

constexpr std::string_view to_string(Suite s) {
  switch (s) {
    case Suite::unspecified: return "unspecified";
    case Suite::robocasa_dev: return "robocasa_dev";
    case Suite::robocasa_test: return "robocasa_test";
    case Suite::molmospaces: return "molmospaces";
  }
  return "?";
}

inline Suite parse_suite(std::string_view s) {
  for (Suite v : {Suite::unspecified, Suite::robocasa_dev, Suite::robocasa_test, Suite::molmospaces}) {
    if (to_string(v) == s) return v;
  }
  throw ValidationError("unknown suite '" + std::string(s) + "'");
}

struct MatrixMetadata {
  Suite suite = Suite::unspecified;
  int episodes_per_cell = 0;
};

class ResultsMatrix {
 public:
  ResultsMatrix() = default;
  ResultsMatrix(std::vector<std::string> rows, std::vector<std::string> cols, MatrixMetadata meta = {})
      : rows_(std::move(rows)), cols_(std::move(cols)), meta_(meta), cells_(rows_.size() * cols_.size()) {
    index(rows_, row_index_, "row");
    index(cols_, col_index_, "column");
  }

  const std::vector<std::string>& rows() const { return rows_; }
  const std::vector<std::string>& cols() const { return cols_; }
  const MatrixMetadata& metadata() const { return meta_; }
  MatrixMetadata& metadata() { return meta_; }

  bool has_row(const std::string& id) const { return row_index_.count(id) > 0; }
  bool has_col(const std::string& id) const { return col_index_.count(id) > 0; }

  std::size_t row_index(const std::string& id) const { return lookup(row_index_, id, "row"); }
  std::size_t col_index(const std::string& id) const { return lookup(col_index_, id, "column"); }

  const std::optional<double>& cell(std::size_t r, std::size_t c) const { return cells_[r * cols_.size() + c]; }
  const std::optional<double>& cell(const std::string& row, const std::string& col) const {
    return cell(row_index(row), col_index(col));
  }

  void set(std::size_t r, std::size_t c, std::optional<double> v) {
    if (v && (*v < 0.0 || *v > 1.0)) {
      throw ValidationError("success rate " + std::to_string(*v) + " at (" + rows_[r] + ", " + cols_[c] +
                            ") is outside [0, 1]");
    }
    cells_[r * cols_.size() + c] = v;
  }
  void set(const std::string& row, const std::string& col, std::optional<double> v) {
    set(row_index(row), col_index(col), v);
  }

  // Value of a filled cell; throws naming (row, column) when it is missing.
  double at(const std::string& row, const std::string& col) const {
    const auto& v = cell(row, col);
    if (!v) throw ValidationError("missing cell (" + row + ", " + col + ")");
    return *v;
  }

  std::vector<double> row(const std::string& id) const {
    std::vector<double> out;
    out.reserve(cols_.size());
    for (const auto& c : cols_) out.push_back(at(id, c));
    return out;
  }

  bool dense() const {
    for (const auto& v : cells_) {
      if (!v) return false;
    }
    return true;
  }

  void require_dense() const {
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      for (std::size_t c = 0; c < cols_.size(); ++c) {
        if (!cell(r, c)) throw ValidationError("missing cell (" + rows_[r] + ", " + cols_[c] + ")");
      }
    }
  }

  ResultsMatrix select_rows(const std::vector<std::string>& ids) const {
    ResultsMatrix out(ids, cols_, meta_);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const auto src = row_index(ids[r]);
      for (std::size_t c = 0; c < cols_.size(); ++c) out.set(r, c, cell(src, c));
    }
    return out;
  }

  ResultsMatrix select_cols(const std::vector<std::string>& ids) const {
    ResultsMatrix out(rows_, ids, meta_);
    for (std::size_t c = 0; c < ids.size(); ++c) {
      const auto src = col_index(ids[c]);
      for (std::size_t r = 0; r < rows_.size(); ++r) out.set(r, c, cell(r, src));
    }
    return out;
  }

  void add_row(const std::string& id, const std::vector<std::optional<double>>& values) {
    if (values.size() != cols_.size()) throw ValidationError("row '" + id + "' has the wrong width");
    if (has_row(id)) throw ValidationError("duplicate row id '" + id + "'");
    row_index_[id] = rows_.size();
    rows_.push_back(id);
    cells_.resize(rows_.size() * cols_.size());
    for (std::size_t c = 0; c < cols_.size(); ++c) set(rows_.size() - 1, c, values[c]);
  }

  void add_col(const std::string& id, const std::vector<std::optional<double>>& values) {
    if (values.size() != rows_.size()) throw ValidationError("column '" + id + "' has the wrong height");
    if (has_col(id)) throw ValidationError("duplicate column id '" + id + "'");
    ResultsMatrix grown(rows_, [&] {
      auto c = cols_;
      c.push_back(id);
      return c;
    }(), meta_);
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      for (std::size_t c = 0; c < cols_.size(); ++c) grown.set(r, c, cell(r, c));
      grown.set(r, cols_.size(), values[r]);
    }
    *this = std::move(grown);
  }

 private:
  static void index(const std::vector<std::string>& ids, std::map<std::string, std::size_t>& out,
                    const char* what) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!out.emplace(ids[i], i).second) {
        throw ValidationError(std::string("duplicate ") + what + " id '" + ids[i] + "'");
      }
    }
  }

  static std::size_t lookup(const std::map<std::string, std::size_t>& m, const std::string& id,
                            const char* what) {
    auto it = m.find(id);
    if (it == m.end()) throw LookupError(std::string("unknown ") + what + " id '" + id + "'");
    return it->second;
  }

  std::vector<std::string> rows_;
  std::vector<std::string> cols_;
  MatrixMetadata meta_;
  std::vector<std::optional<double>> cells_;
  std::map<std::string, std::size_t> row_index_;
  std::map<std::string, std::size_t> col_index_;
};

namespace csv {

// Splits one CSV record; supports double-quoted fields with "" escapes.
inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw ValidationError("unterminated quote in CSV line");
  out.push_back(std::move(field));
  return out;
}

inline std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace csv

inline ResultsMatrix read_matrix_csv(std::istream& in, const std::string& source = "<csv>") {
  MatrixMetadata meta;
  std::string line;
  std::vector<std::string> header;
  std::vector<std::pair<std::string, std::vector<std::string>>> body;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = csv::trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      const auto key = csv::trim(line.substr(1, colon - 1));
      const auto value = csv::trim(line.substr(colon + 1));
      if (key == "suite") meta.suite = parse_suite(value);
      if (key == "episodes_per_cell") meta.episodes_per_cell = std::stoi(value);
      continue;
    }
    auto fields = csv::split_line(line);
    for (auto& f : fields) f = csv::trim(f);
    if (header.empty()) {
      header = std::move(fields);
      continue;
    }
    if (fields.size() != header.size()) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    auto id = fields.front();
    fields.erase(fields.begin());
    body.emplace_back(std::move(id), std::move(fields));
  }
  if (header.empty()) throw ValidationError(source + ": missing header row");
  std::vector<std::string> cols(header.begin() + 1, header.end());
  std::vector<std::string> rows;
  for (const auto& [id, _] : body) rows.push_back(id);
  ResultsMatrix m(rows, cols, meta);
  for (std::size_t r = 0; r < body.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const auto& text = body[r].second[c];
      if (text.empty()) continue;
      std::size_t used = 0;
      double v = 0;
      try {
        v = std::stod(text, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != text.size()) {
        throw ValidationError(source + ": cell (" + rows[r] + ", " + cols[c] + ") is not a number: " + text);
      }
      m.set(r, c, v);
    }
  }
  return m;
}

inline ResultsMatrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_matrix_csv(in, path.string());
}

// Writes full-precision values (%.17g) unless `digits` is given, in which
// case cells are rounded half away from zero.
inline void write_matrix_csv(std::ostream& out, const ResultsMatrix& m, std::optional<int> digits = std::nullopt,
                             const std::string& corner = "condition") {
  if (m.metadata().suite != Suite::unspecified) out << "# suite: " << to_string(m.metadata().suite) << "\n";
  if (m.metadata().episodes_per_cell > 0) out << "# episodes_per_cell: " << m.metadata().episodes_per_cell << "\n";
  out << csv::quote_if_needed(corner);
  for (const auto& c : m.cols()) out << ',' << csv::quote_if_needed(c);
  out << '\n';
  for (std::size_t r = 0; r < m.rows().size(); ++r) {
    out << csv::quote_if_needed(m.rows()[r]);
    for (std::size_t c = 0; c < m.cols().size(); ++c) {
      out << ',';
      if (const auto& v = m.cell(r, c)) {
        char buf[32];
        if (digits) {
          std::snprintf(buf, sizeof(buf), "%.*f", *digits, round_half_away(*v, *digits));
        } else {
          std::snprintf(buf, sizeof(buf), "%.17g", *v);
        }
        out << buf;
      }
    }
    out << '\n';
  }
}

}  // namespace demian
