#include "mixcpd/csv.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "mixcpd/errors.hpp"

namespace mixcpd {

namespace {

std::vector<std::string> split_csv_line(const std::string &line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ','))
    cells.push_back(cell);
  if (!line.empty() && line.back() == ',')
    cells.emplace_back();
  return cells;
}

std::optional<double> parse_cell(std::string cell) {
  const auto first = cell.find_first_not_of(" \t\r");
  if (first == std::string::npos)
    return std::nullopt;
  cell = cell.substr(first, cell.find_last_not_of(" \t\r") - first + 1);
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size())
      return std::nullopt;
    return v;
  } catch (const std::exception &) {
    return std::nullopt;
  }
}

} // namespace

CsvData read_csv(std::istream &in) {
  CsvData data;
  std::string line;
  std::size_t row = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    auto cells = split_csv_line(line);
    if (width == 0 && data.names.empty()) {
      const bool any_numeric = std::any_of(cells.begin(), cells.end(), [](const auto &s) { return parse_cell(s); });
      if (!any_numeric) {
        data.names = cells;
        width = cells.size();
        continue;
      }
    }
    if (width == 0)
      width = cells.size();
    if (cells.size() != width)
      throw ParseError("expected " + std::to_string(width) + " columns, found " + std::to_string(cells.size()), row,
                       std::min(cells.size(), width) + 1);
    std::vector<double> values(width);
    for (std::size_t j = 0; j < width; ++j) {
      const auto v = parse_cell(cells[j]);
      if (!v || !std::isfinite(*v))
        throw ParseError("not a finite number: '" + cells[j] + "'", row, j + 1);
      values[j] = *v;
    }
    data.rows.push_back(std::move(values));
  }
  if (width == 0)
    throw ParseError("no data rows", row, 1);
  if (data.names.empty())
    for (std::size_t j = 0; j < width; ++j)
      data.names.push_back("s" + std::to_string(j));
  return data;
}

} // namespace mixcpd
