#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

namespace mixcpd {

/// Sliding window of per-stream cumulative sums S[n, j] = y[n, 1] + ... + y[n, j].
///
/// Time is 1-based: after t pushes the addressable columns are
/// j in [max(0, t - capacity), t], with S[n, 0] = 0. Each column is a
/// contiguous row of n_streams doubles so window kernels can stream over n.
/// Running totals are carried in long double and rounded once per column,
/// so long runs do not accumulate rounding drift in the stored sums.
class StreamState {
public:
  StreamState(std::size_t n_streams, std::size_t window_capacity, bool retain_raw = false);

  /// Appends one observation vector; throws DimensionError on length mismatch.
  void push(std::span<const double> y);

  std::size_t n_streams() const noexcept { return n_streams_; }
  std::size_t window_capacity() const noexcept { return capacity_; }
  std::int64_t time() const noexcept { return time_; }
  bool retains_raw() const noexcept { return retain_raw_; }

  /// Oldest addressable column index.
  std::int64_t oldest() const noexcept;
  bool addressable(std::int64_t j) const noexcept { return j >= oldest() && j <= time_; }

  /// Row of prefix sums for column j; throws WindowError when j is not addressable.
  std::span<const double> prefix(std::int64_t j) const;
  double prefix(std::int64_t j, std::size_t n) const;

  /// Unchecked row pointer; j must be addressable.
  const double *row(std::int64_t j) const noexcept {
    return ring_.data() + static_cast<std::size_t>(j % static_cast<std::int64_t>(slots_)) * n_streams_;
  }

  /// Raw observation y[n, j] for j in (oldest(), time()]; only when constructed with retain_raw.
  double raw(std::int64_t j, std::size_t n) const;

  nlohmann::json snapshot() const;
  static StreamState restore(const nlohmann::json &snap);

private:
  std::size_t n_streams_;
  std::size_t capacity_;
  std::size_t slots_;
  std::int64_t time_ = 0;
  bool retain_raw_;
  std::vector<double> ring_;
  std::vector<long double> running_;
  std::vector<double> raw_ring_;
};

/// U[n,k,t] = (S[n,t] - S[n,k]) / sqrt(t - k). Requires k addressable and k < t.
double u_stat(const StreamState &state, std::int64_t k, std::size_t n);

/// Per-stream log GLR, (max(U, 0))^2 / 2.
double glr_stat(const StreamState &state, std::int64_t k, std::size_t n);

/// Log-likelihood ratio at a nominal mean delta: delta (S[n,t] - S[n,k]) - delta^2 (t - k) / 2.
double loglik_fixed(const StreamState &state, std::int64_t k, std::size_t n, double delta);

/// Change-point scenario for simulation: affected streams shift to mean mu_n after kappa.
///
/// Stream indices are 0-based. change_point == nullopt is the no-change regime.
struct Scenario {
  std::size_t n_streams = 1;
  std::optional<std::int64_t> change_point;
  std::vector<std::size_t> affected;
  std::vector<double> means;
  std::uint64_t seed = 0;

  void validate() const;

  /// Euclidean norm of the post-change mean vector.
  double signal_norm() const;
  double affected_fraction() const;
  std::size_t affected_count() const { return affected.size(); }

  /// Length-n_streams vector with mu_n on affected streams and 0 elsewhere.
  std::vector<double> mean_vector() const;

  static Scenario null(std::size_t n_streams, std::uint64_t seed = 0);
  /// Change at kappa affecting the first `count` streams, all with the same mean.
  static Scenario leading(std::size_t n_streams, std::size_t count, double mu, std::int64_t kappa = 0,
                          std::uint64_t seed = 0);
  static Scenario from_means(std::vector<double> mean_vector, std::int64_t kappa = 0, std::uint64_t seed = 0);
};

} // namespace mixcpd
