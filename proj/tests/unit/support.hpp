#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mixcpd/detector.hpp"
#include "mixcpd/stream_state.hpp"

namespace testing {

/// Gaussian rows from a generator independent of the library's Philox streams.
inline std::vector<std::vector<double>> gaussian_rows(std::uint64_t seed, std::size_t t, std::size_t n,
                                                      std::span<const double> means = {}) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> rows(t, std::vector<double>(n));
  for (auto &row : rows)
    for (std::size_t i = 0; i < n; ++i)
      row[i] = z(gen) + (means.empty() ? 0.0 : means[i]);
  return rows;
}

inline mixcpd::StreamState filled_state(const std::vector<std::vector<double>> &rows, std::size_t capacity,
                                        bool retain_raw = false) {
  mixcpd::StreamState s(rows.front().size(), capacity, retain_raw);
  for (const auto &r : rows)
    s.push(r);
  return s;
}

inline mixcpd::DetectorConfig config(mixcpd::Rule rule, double p0, double b, std::int64_t m1 = 50,
                                     double delta = 1.0, std::int64_t m0 = 1) {
  mixcpd::DetectorConfig d;
  d.rule = rule;
  d.p0 = p0;
  d.b = b;
  d.m0 = m0;
  d.m1 = m1;
  d.delta = delta;
  return d;
}

/// Stopping time over rows, or 0 when the rows run out.
inline std::int64_t stop_time(const mixcpd::DetectorConfig &cfg, const std::vector<std::vector<double>> &rows) {
  auto det = mixcpd::make_detector(cfg, rows.front().size());
  const auto d = mixcpd::run_until_stop(*det, rows);
  return d.stopped ? d.stop_time : 0;
}

inline bool close_rel(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)); }

} // namespace testing
