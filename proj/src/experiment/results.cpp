// SPDX-License-Identifier: Apache-2.0
#include "avsr/experiment/results.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "avsr/core/error.hpp"

namespace avsr::experiment {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

std::string exact(const std::optional<double>& v, const char* missing) {
  if (!v) return missing;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

std::optional<double> parse_value(const std::string& s, const char* missing, std::size_t line) {
  if (s == missing) return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw FormatError("result line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

bool clean_field(const std::string& s) {
  return s.find_first_of("\t\n,") == std::string::npos;
}

}  // namespace

void ResultTable::add(ResultCell cell) {
  if (std::find(rows.begin(), rows.end(), cell.row) == rows.end()) {
    throw ConfigError("table " + id + ": unknown row " + cell.row);
  }
  if (std::find(columns.begin(), columns.end(), cell.column) == columns.end()) {
    throw ConfigError("table " + id + ": unknown column " + cell.column);
  }
  if (find(cell.row, cell.column)) throw ConfigError("table " + id + ": duplicate cell " + cell.row + "/" + cell.column);
  cells.push_back(std::move(cell));
}

const ResultCell* ResultTable::find(const std::string& row, const std::string& column) const {
  for (const auto& c : cells) {
    if (c.row == row && c.column == column) return &c;
  }
  return nullptr;
}

std::string ResultTable::text() const {
  std::vector<std::vector<std::string>> grid;
  std::vector<std::string> header{""};
  for (const auto& c : columns) {
    header.push_back(c);
    header.push_back("reference (published)");
  }
  grid.push_back(header);
  for (const auto& r : rows) {
    std::vector<std::string> line{r};
    for (const auto& c : columns) {
      const ResultCell* cell = find(r, c);
      char buf[32];
      if (!cell) {
        line.push_back("missing");
      } else if (cell->failed()) {
        line.push_back("failed");
      } else {
        std::snprintf(buf, sizeof buf, "%.4f", *cell->accuracy);
        line.push_back(buf);
      }
      if (cell && cell->reference) {
        std::snprintf(buf, sizeof buf, "%.4f", *cell->reference);
        line.push_back(buf);
      } else {
        line.push_back("-");
      }
    }
    grid.push_back(line);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : grid)
    for (std::size_t i = 0; i < line.size(); ++i) width[i] = std::max(width[i], line[i].size());
  std::ostringstream os;
  os << title << "\n";
  for (const auto& line : grid) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (i == 0) {
        os << line[i] << std::string(width[i] - line[i].size(), ' ');
      } else {
        os << "  " << std::string(width[i] - line[i].size(), ' ') << line[i];
      }
    }
    os << "\n";
  }
  return os.str();
}

void write_lines(std::ostream& out, const std::vector<ResultTable>& tables) {
  for (const auto& t : tables) {
    for (const auto& f : {t.id, t.title}) {
      if (!clean_field(f) || f.find(',') != std::string::npos) throw FormatError("table field '" + f + "' cannot be written");
    }
    for (const auto& v : {t.rows, t.columns})
      for (const auto& f : v) {
        if (!clean_field(f) || f.empty()) throw FormatError("table label '" + f + "' cannot be written");
      }
    out << "table\t" << t.id << "\t" << t.title << "\t" << join(t.rows, ',') << "\t" << join(t.columns, ',') << "\n";
    for (const auto& c : t.cells) {
      out << "cell\t" << t.id << "\t" << c.row << "\t" << c.column << "\t" << exact(c.accuracy, "failed") << "\t"
          << exact(c.reference, "-") << "\n";
    }
  }
}

std::vector<ResultTable> parse_lines(std::istream& in) {
  std::vector<ResultTable> tables;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    const std::string where = "result line " + std::to_string(n);
    if (f[0] == "table") {
      if (f.size() != 5) throw FormatError(where + ": table header needs 5 fields");
      ResultTable t;
      t.id = f[1];
      t.title = f[2];
      t.rows = split(f[3], ',');
      t.columns = split(f[4], ',');
      tables.push_back(std::move(t));
    } else if (f[0] == "cell") {
      if (f.size() != 6) throw FormatError(where + ": cell line needs 6 fields");
      if (tables.empty() || tables.back().id != f[1]) throw FormatError(where + ": cell outside its table");
      try {
        tables.back().add({f[2], f[3], parse_value(f[4], "failed", n), parse_value(f[5], "-", n)});
      } catch (const ConfigError& e) {
        throw FormatError(where + ": " + e.what());
      }
    } else {
      throw FormatError(where + ": unknown record '" + f[0] + "'");
    }
  }
  return tables;
}

}  // namespace avsr::experiment
