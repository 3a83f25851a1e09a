#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mixcpd/detector.hpp"
#include "mixcpd/montecarlo.hpp"
#include "mixcpd/stream_state.hpp"

namespace mixcpd {

enum class SimMode { arl, edd };
enum class OutputFormat { text, jsonl };

/// Flat key = value run description shared by config files and command-line flags.
/// Text form: one `key = value` per line, '#' starts a comment. Lists are comma-separated;
/// `components` is a ';'-separated list of rule:p0:b[:delta].
struct RunConfig {
  // detector
  Rule rule = Rule::t2;
  std::size_t N = 100;
  double p0 = 0.1;
  double delta = 1.0;
  double b = 0.0;
  std::int64_t m0 = 1;
  std::int64_t m1 = 200;
  std::vector<ComponentConfig> components;

  // calibration targets
  std::optional<double> target_arl;
  std::optional<std::int64_t> tail_m;
  std::optional<double> alpha;

  // scenario
  std::int64_t kappa = 0;
  std::optional<std::size_t> affected;
  std::vector<std::size_t> affected_list;
  double mu = 1.0;

  // Monte Carlo
  std::size_t trials = 200;
  std::int64_t horizon = 0;
  std::int64_t cap = 0;
  std::uint64_t seed = 1;
  SimMode mode = SimMode::arl;
  RunMode run_mode = RunMode::tail_shortcut;
  DelayCount count = DelayCount::inclusive;
  unsigned threads = 0;

  // sensor grid (profile rule)
  std::size_t rows = 25;
  std::size_t cols = 25;
  double spacing = 1.0;
  std::vector<double> betas{1.0};
  double candidate_spacing = 0.0;

  // output
  std::string output;
  OutputFormat format = OutputFormat::text;

  /// Throws ParseError (row = line, column = 1-based offset) on syntax errors or unknown keys.
  static RunConfig parse(std::string_view text);
  static const std::vector<std::string> &keys();

  /// Throws ParameterError for unknown keys or malformed values.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  /// True when the key holds a value (optional keys may be unset).
  bool has(std::string_view key) const;

  /// Canonical text: every set key in keys() order, doubles at 17 significant digits.
  std::string serialize() const;
  /// FNV-1a 64 of serialize().
  std::uint64_t hash() const;
  std::string hash_hex() const;

  DetectorConfig detector_config() const;
  Scenario scenario() const;
  /// Validates every field against the owning module's preconditions.
  void validate() const;

  bool operator==(const RunConfig &) const = default;
};

std::string_view to_string(SimMode mode);
std::string_view to_string(RunMode mode);
std::string_view to_string(DelayCount count);
std::string_view to_string(OutputFormat format);

/// Shortest text that parses back to the same double; used in records and config text.
std::string format_double(double v);

} // namespace mixcpd
