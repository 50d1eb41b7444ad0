// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace avsr::experiment {

struct ResultCell {
  std::string row;
  std::string column;
  std::optional<double> accuracy;   // empty when the run failed
  std::optional<double> reference;  // published large-scale value, if any

  bool failed() const { return !accuracy.has_value(); }
  bool operator==(const ResultCell&) const = default;
};

/// Accuracy grid keyed by (row, column). Rows are modalities, columns are
/// the settings of one ablation axis.
struct ResultTable {
  std::string id;     // one word, e.g. "attention"
  std::string title;
  std::vector<std::string> rows;
  std::vector<std::string> columns;
  std::vector<ResultCell> cells;

  /// ConfigError for an unknown row/column or a cell already present.
  void add(ResultCell cell);
  const ResultCell* find(const std::string& row, const std::string& column) const;
  bool complete() const { return cells.size() == rows.size() * columns.size(); }

  /// Aligned text with a reference column next to each measured one.
  std::string text() const;

  bool operator==(const ResultTable&) const = default;
};

/// Tab-separated lines: one "table" header then one "cell" line per cell.
/// Doubles are written with 17 significant digits so parsing is exact.
void write_lines(std::ostream& out, const std::vector<ResultTable>& tables);
/// Inverse of write_lines; FormatError on malformed input.
std::vector<ResultTable> parse_lines(std::istream& in);

}  // namespace avsr::experiment
