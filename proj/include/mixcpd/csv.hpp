#pragma once

#include <istream>
#include <string>
#include <vector>

namespace mixcpd {

struct CsvData {
  std::vector<std::string> names; ///< header cells, or s0, s1, ... when the file has none
  std::vector<std::vector<double>> rows;
};

/// One row per time step, one column per sensor. The first row is a header when none of its cells
/// is numeric. Ragged rows and non-numeric or non-finite cells throw ParseError with the 1-based
/// line and column.
CsvData read_csv(std::istream &in);

} // namespace mixcpd
