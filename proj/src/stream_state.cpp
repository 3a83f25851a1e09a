#include "mixcpd/stream_state.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mixcpd/errors.hpp"

namespace mixcpd {

StreamState::StreamState(std::size_t n_streams, std::size_t window_capacity, bool retain_raw)
    : n_streams_(n_streams), capacity_(window_capacity), slots_(window_capacity + 1), retain_raw_(retain_raw) {
  if (n_streams == 0)
    throw ParameterError("stream count must be positive");
  if (window_capacity == 0)
    throw ParameterError("window capacity must be positive");
  ring_.assign(slots_ * n_streams_, 0.0);
  running_.assign(n_streams_, 0.0L);
  if (retain_raw_)
    raw_ring_.assign(slots_ * n_streams_, 0.0);
}

void StreamState::push(std::span<const double> y) {
  if (y.size() != n_streams_)
    throw DimensionError("observation has " + std::to_string(y.size()) + " entries, expected " +
                         std::to_string(n_streams_));
  ++time_;
  const std::size_t slot = static_cast<std::size_t>(time_ % static_cast<std::int64_t>(slots_));
  double *dst = ring_.data() + slot * n_streams_;
  for (std::size_t n = 0; n < n_streams_; ++n) {
    running_[n] += static_cast<long double>(y[n]);
    dst[n] = static_cast<double>(running_[n]);
  }
  if (retain_raw_)
    std::copy(y.begin(), y.end(), raw_ring_.begin() + static_cast<std::ptrdiff_t>(slot * n_streams_));
}

std::int64_t StreamState::oldest() const noexcept {
  return std::max<std::int64_t>(0, time_ - static_cast<std::int64_t>(capacity_));
}

std::span<const double> StreamState::prefix(std::int64_t j) const {
  if (!addressable(j))
    throw WindowError("column " + std::to_string(j) + " outside window [" + std::to_string(oldest()) + ", " +
                      std::to_string(time_) + "]");
  return {row(j), n_streams_};
}

double StreamState::prefix(std::int64_t j, std::size_t n) const {
  if (n >= n_streams_)
    throw DimensionError("stream index " + std::to_string(n) + " out of range");
  return prefix(j)[n];
}

double StreamState::raw(std::int64_t j, std::size_t n) const {
  if (!retain_raw_)
    throw ParameterError("raw observations are not retained by this state");
  if (j <= oldest() || j > time_)
    throw WindowError("raw observation " + std::to_string(j) + " not retained");
  if (n >= n_streams_)
    throw DimensionError("stream index " + std::to_string(n) + " out of range");
  return raw_ring_[static_cast<std::size_t>(j % static_cast<std::int64_t>(slots_)) * n_streams_ + n];
}

nlohmann::json StreamState::snapshot() const {
  nlohmann::json snap;
  snap["n_streams"] = n_streams_;
  snap["window_capacity"] = capacity_;
  snap["time"] = time_;
  snap["retain_raw"] = retain_raw_;
  snap["ring"] = ring_;
  // long double totals split into two doubles so the snapshot is exact in JSON
  std::vector<double> hi(n_streams_), lo(n_streams_);
  for (std::size_t n = 0; n < n_streams_; ++n) {
    hi[n] = static_cast<double>(running_[n]);
    lo[n] = static_cast<double>(running_[n] - static_cast<long double>(hi[n]));
  }
  snap["running_hi"] = hi;
  snap["running_lo"] = lo;
  if (retain_raw_)
    snap["raw_ring"] = raw_ring_;
  return snap;
}

StreamState StreamState::restore(const nlohmann::json &snap) {
  StreamState state(snap.at("n_streams").get<std::size_t>(), snap.at("window_capacity").get<std::size_t>(),
                    snap.at("retain_raw").get<bool>());
  state.time_ = snap.at("time").get<std::int64_t>();
  auto ring = snap.at("ring").get<std::vector<double>>();
  auto hi = snap.at("running_hi").get<std::vector<double>>();
  auto lo = snap.at("running_lo").get<std::vector<double>>();
  if (ring.size() != state.ring_.size() || hi.size() != state.n_streams_ || lo.size() != state.n_streams_)
    throw ParameterError("stream state snapshot has inconsistent sizes");
  state.ring_ = std::move(ring);
  for (std::size_t n = 0; n < state.n_streams_; ++n)
    state.running_[n] = static_cast<long double>(hi[n]) + static_cast<long double>(lo[n]);
  if (state.retain_raw_)
    state.raw_ring_ = snap.at("raw_ring").get<std::vector<double>>();
  return state;
}

namespace {

void check_candidate(const StreamState &state, std::int64_t k, std::size_t n) {
  if (n >= state.n_streams())
    throw DimensionError("stream index " + std::to_string(n) + " out of range");
  if (k >= state.time() || !state.addressable(k))
    throw WindowError("change-point candidate " + std::to_string(k) + " outside window at t=" +
                      std::to_string(state.time()));
}

} // namespace

double u_stat(const StreamState &state, std::int64_t k, std::size_t n) {
  check_candidate(state, k, n);
  const std::int64_t t = state.time();
  return (state.row(t)[n] - state.row(k)[n]) / std::sqrt(static_cast<double>(t - k));
}

double glr_stat(const StreamState &state, std::int64_t k, std::size_t n) {
  const double u = std::max(u_stat(state, k, n), 0.0);
  return 0.5 * u * u;
}

double loglik_fixed(const StreamState &state, std::int64_t k, std::size_t n, double delta) {
  if (!(delta > 0.0))
    throw ParameterError("nominal mean delta must be positive");
  check_candidate(state, k, n);
  const std::int64_t t = state.time();
  const double w = static_cast<double>(t - k);
  return delta * (state.row(t)[n] - state.row(k)[n]) - 0.5 * delta * delta * w;
}

void Scenario::validate() const {
  if (n_streams == 0)
    throw ParameterError("scenario needs at least one stream");
  if (affected.size() != means.size())
    throw ParameterError("scenario affected set and means differ in length");
  if (!change_point && !affected.empty())
    throw ParameterError("scenario without a change-point cannot have affected streams");
  if (change_point && *change_point < 0)
    throw ParameterError("change-point must be nonnegative");
  std::vector<std::size_t> sorted = affected;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ParameterError("scenario affected set has duplicates");
  for (std::size_t i = 0; i < affected.size(); ++i) {
    if (affected[i] >= n_streams)
      throw ParameterError("affected stream " + std::to_string(affected[i]) + " out of range");
    if (!(means[i] > 0.0))
      throw ParameterError("post-change means must be strictly positive");
  }
}

double Scenario::signal_norm() const {
  double sum = 0.0;
  for (double mu : means)
    sum += mu * mu;
  return std::sqrt(sum);
}

double Scenario::affected_fraction() const {
  return static_cast<double>(affected.size()) / static_cast<double>(n_streams);
}

std::vector<double> Scenario::mean_vector() const {
  std::vector<double> mu(n_streams, 0.0);
  for (std::size_t i = 0; i < affected.size(); ++i)
    mu[affected[i]] = means[i];
  return mu;
}

Scenario Scenario::null(std::size_t n_streams, std::uint64_t seed) {
  Scenario s;
  s.n_streams = n_streams;
  s.seed = seed;
  return s;
}

Scenario Scenario::leading(std::size_t n_streams, std::size_t count, double mu, std::int64_t kappa,
                           std::uint64_t seed) {
  Scenario s;
  s.n_streams = n_streams;
  s.change_point = kappa;
  s.seed = seed;
  for (std::size_t n = 0; n < count; ++n) {
    s.affected.push_back(n);
    s.means.push_back(mu);
  }
  s.validate();
  return s;
}

Scenario Scenario::from_means(std::vector<double> mean_vector, std::int64_t kappa, std::uint64_t seed) {
  Scenario s;
  s.n_streams = mean_vector.size();
  s.change_point = kappa;
  s.seed = seed;
  for (std::size_t n = 0; n < mean_vector.size(); ++n) {
    if (mean_vector[n] > 0.0) {
      s.affected.push_back(n);
      s.means.push_back(mean_vector[n]);
    }
  }
  s.validate();
  return s;
}

} // namespace mixcpd
