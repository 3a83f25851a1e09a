#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mixcpd {

struct ReproduceOptions {
  std::size_t trials = 200;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  bool theory_only = false; ///< skip Monte Carlo cells
};

/// One regenerated cell next to its printed value.
struct CellResult {
  std::string table;
  std::string label;
  std::string kind; ///< "theory", "mc" or "threshold"
  double value = 0.0;
  double std_error = 0.0;
  std::optional<double> reference; ///< printed value, when one exists
  double tolerance = 0.0;          ///< allowed |value - reference|
  std::optional<bool> pass;        ///< unset for cells without a printed value
  std::string note;
};

/// Golden values shipped with the library.
const nlohmann::json &reference_tables();

/// Table ids: "1" .. "7" and "fig1". Throws ParameterError for anything else.
std::vector<std::string> table_ids();
std::vector<CellResult> reproduce_table(std::string_view id, const ReproduceOptions &options = {});

/// Half a unit in the 4th significant digit of `reference`.
double sig_digit_tolerance(double reference, int digits = 4);
/// Standard error of a printed n-trial Monte Carlo mean whose per-trial spread is `sd`.
double printed_se(double sd, std::size_t printed_trials);

} // namespace mixcpd
