#include "mixcpd/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "mixcpd/errors.hpp"
#include "mixcpd/rng.hpp"

namespace mixcpd {

namespace {

/// Compensated running sum; aggregation runs in index order so results do not depend on threads.
class KahanSum {
public:
  void add(double x) noexcept {
    const double y = x - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const noexcept { return s_; }

private:
  double s_ = 0.0;
  double c_ = 0.0;
};

std::int64_t default_cap(const TrialPlan &plan) {
  if (plan.cap > 0)
    return plan.cap;
  if (plan.scenario.change_point)
    return *plan.scenario.change_point + 10 * plan.detector.m1;
  return 1'000'000;
}

std::pair<double, double> mean_and_se(std::span<const double> x) {
  KahanSum s;
  for (double v : x)
    s.add(v);
  const double n = static_cast<double>(x.size());
  const double mean = s.value() / n;
  KahanSum ss;
  for (double v : x)
    ss.add((v - mean) * (v - mean));
  const double var = x.size() > 1 ? ss.value() / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

} // namespace

void TrialPlan::validate() const {
  detector.validate();
  scenario.validate();
  if (n_trials == 0)
    throw ParameterError("trial count must be positive");
  if (mode == RunMode::tail_shortcut && horizon <= 0)
    throw ParameterError("tail-shortcut mode needs a positive horizon m");
  if (cap < 0)
    throw ParameterError("cap must be nonnegative");
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)> &fn) {
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure)
            failure = std::current_exception();
          next.store(n);
        }
      }
    });
  }
  for (auto &t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);
}

TrialOutcome run_trial(const TrialPlan &plan, std::size_t index, std::int64_t limit) {
  const std::size_t n = plan.scenario.n_streams;
  auto detector = make_detector(plan.detector, n);
  TrialRng rng(plan.seed, index);
  const std::vector<double> mu = plan.scenario.mean_vector();
  const std::int64_t kappa = plan.scenario.change_point.value_or(std::numeric_limits<std::int64_t>::max());
  std::vector<double> y(n);
  TrialOutcome out;
  out.max_score = -std::numeric_limits<double>::infinity();
  for (std::int64_t t = 1; t <= limit; ++t) {
    rng.fill_gaussian(y);
    if (t > kappa)
      for (std::size_t i = 0; i < n; ++i)
        y[i] += mu[i];
    const Decision d = detector->step(y);
    out.max_score = std::max(out.max_score, d.score);
    if (d.stopped) {
      out.time = t;
      return out;
    }
  }
  out.time = limit;
  out.censored = true;
  return out;
}

Estimate arl_from_tail(double p_hat, std::int64_t horizon, std::size_t n_trials) {
  if (!(p_hat > 0.0))
    throw SimulationError("horizon too short: no trial stopped within m = " + std::to_string(horizon) +
                          "; increase the horizon so that P{T <= m} is about 0.05-0.1");
  if (!(p_hat < 1.0))
    throw SimulationError("horizon too long: every trial stopped within m = " + std::to_string(horizon) +
                          "; decrease the horizon or use full runs");
  const double m = static_cast<double>(horizon);
  const double l = -std::log1p(-p_hat);
  Estimate e;
  e.value = m / l;
  e.std_error = m / ((1.0 - p_hat) * l * l) * std::sqrt(p_hat * (1.0 - p_hat) / static_cast<double>(n_trials));
  e.n_trials = n_trials;
  e.method = "tail-shortcut";
  return e;
}

Estimate estimate_arl(const TrialPlan &plan) {
  plan.validate();
  if (plan.scenario.change_point)
    throw ParameterError("ARL estimation needs the no-change scenario");
  const std::int64_t limit = plan.mode == RunMode::tail_shortcut ? plan.horizon : default_cap(plan);
  std::vector<TrialOutcome> outcomes(plan.n_trials);
  parallel_for(plan.n_trials, plan.threads, [&](std::size_t i) { outcomes[i] = run_trial(plan, i, limit); });

  std::size_t censored = 0;
  std::vector<std::int64_t> times(plan.n_trials);
  std::vector<double> as_double(plan.n_trials);
  for (std::size_t i = 0; i < plan.n_trials; ++i) {
    times[i] = outcomes[i].time;
    as_double[i] = static_cast<double>(outcomes[i].time);
    censored += outcomes[i].censored ? 1 : 0;
  }
  Estimate e;
  if (plan.mode == RunMode::tail_shortcut) {
    const double p_hat = static_cast<double>(plan.n_trials - censored) / static_cast<double>(plan.n_trials);
    e = arl_from_tail(p_hat, plan.horizon, plan.n_trials);
  } else {
    if (static_cast<double>(censored) > 0.01 * static_cast<double>(plan.n_trials))
      throw SimulationError(std::to_string(censored) + " of " + std::to_string(plan.n_trials) +
                            " full runs hit the cap " + std::to_string(limit) +
                            "; censoring above 1% is refused, raise the cap or use the tail shortcut");
    const auto [mean, se] = mean_and_se(as_double);
    e.value = mean;
    e.std_error = se;
    e.n_trials = plan.n_trials;
    e.method = "full-run";
  }
  e.censored = censored;
  e.times = std::move(times);
  return e;
}

Estimate estimate_edd(const TrialPlan &plan, DelayCount count) {
  plan.validate();
  if (!plan.scenario.change_point || plan.scenario.affected.empty())
    throw ParameterError("EDD estimation needs a change-point and a nonempty affected set");
  const std::int64_t kappa = *plan.scenario.change_point;
  const std::int64_t limit = default_cap(plan);
  std::vector<TrialOutcome> outcomes(plan.n_trials);
  parallel_for(plan.n_trials, plan.threads, [&](std::size_t i) { outcomes[i] = run_trial(plan, i, limit); });

  Estimate e;
  std::vector<double> delays;
  delays.reserve(plan.n_trials);
  e.times.reserve(plan.n_trials);
  const double extra = count == DelayCount::inclusive ? 1.0 : 0.0;
  for (const auto &o : outcomes) {
    e.times.push_back(o.time);
    e.censored += o.censored ? 1 : 0;
    // false alarms before kappa count as zero delay
    delays.push_back(std::max(0.0, static_cast<double>(o.time - kappa)) + extra);
  }
  const auto [mean, se] = mean_and_se(delays);
  e.value = mean;
  e.std_error = se;
  e.n_trials = plan.n_trials;
  e.method = count == DelayCount::inclusive ? "edd-inclusive" : "edd";
  if (e.censored > 0)
    e.method += " (censored " + std::to_string(e.censored) + " at " + std::to_string(limit) + ")";
  return e;
}

double threshold_for_alpha(std::span<const double> max_scores, double alpha) {
  if (!(alpha > 0.0))
    throw CalibrationError("tail target alpha must be positive");
  if (alpha >= 1.0)
    return 0.0;
  if (max_scores.empty())
    throw CalibrationError("no trials to calibrate from");
  std::vector<double> s(max_scores.begin(), max_scores.end());
  std::sort(s.begin(), s.end());
  const double h = (1.0 - alpha) * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

EmpiricalCalibration calibrate_empirical(const DetectorConfig &detector, std::size_t n_streams, TailTarget target,
                                         std::size_t n_trials, std::uint64_t seed, unsigned threads) {
  if (target.horizon <= 0)
    throw CalibrationError("calibration horizon must be positive");
  if (n_trials == 0)
    throw CalibrationError("trial count must be positive");
  detector.validate();
  DetectorConfig probe = detector;
  probe.b = std::numeric_limits<double>::infinity();
  for (auto &c : probe.components)
    c.b = std::numeric_limits<double>::infinity();
  const std::size_t n_components = probe.rule == Rule::parallel ? probe.components.size() : 1;

  EmpiricalCalibration out;
  out.n_trials = n_trials;
  out.max_scores.assign(n_components, std::vector<double>(n_trials, -std::numeric_limits<double>::infinity()));
  parallel_for(n_trials, threads, [&](std::size_t i) {
    auto det = make_detector(probe, n_streams);
    TrialRng rng(seed, i);
    std::vector<double> y(n_streams);
    for (std::int64_t t = 1; t <= target.horizon; ++t) {
      rng.fill_gaussian(y);
      const Decision d = det->step(y);
      if (n_components == 1) {
        out.max_scores[0][i] = std::max(out.max_scores[0][i], d.score);
      } else {
        const auto scores = det->component_scores();
        for (std::size_t c = 0; c < n_components; ++c)
          out.max_scores[c][i] = std::max(out.max_scores[c][i], scores[c]);
      }
    }
  });
  for (const auto &scores : out.max_scores)
    out.thresholds.push_back(threshold_for_alpha(scores, target.alpha));
  return out;
}

ExponentialityReport exponentiality_report(std::span<const std::int64_t> times, std::span<const bool> censored,
                                           std::size_t curve_points) {
  if (!censored.empty() && censored.size() != times.size())
    throw DimensionError("censoring flags and stopping times differ in length");
  if (times.size() < 2)
    throw ParameterError("exponentiality check needs at least two stopping times");
  ExponentialityReport r;
  r.n = times.size();
  const double n = static_cast<double>(r.n);

  KahanSum total;
  std::vector<double> events;
  double horizon = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double t = static_cast<double>(times[i]);
    if (t <= 0.0)
      throw ParameterError("stopping times must be positive");
    total.add(t);
    if (!censored.empty() && censored[i]) {
      ++r.censored;
      horizon = std::min(horizon, t);
    } else {
      events.push_back(t);
    }
  }
  if (events.empty())
    throw SimulationError("every run is censored; no exponential fit is possible");
  r.mean = total.value() / static_cast<double>(events.size());
  std::sort(events.begin(), events.end());

  // sup |F_n - F| over event times; the empirical CDF jumps at each event, ties collapse to one jump
  const auto fit_cdf = [&](double t) { return -std::expm1(-t / r.mean); };
  double d = 0.0;
  for (std::size_t i = 0; i < events.size();) {
    std::size_t j = i;
    while (j < events.size() && events[j] == events[i])
      ++j;
    const double f = fit_cdf(events[i]);
    d = std::max(d, std::max(static_cast<double>(j) / n - f, f - static_cast<double>(i) / n));
    i = j;
  }
  r.ks_distance = d;
  const double sqrt_n = std::sqrt(n);
  r.ks_modified = (d - 0.2 / n) * (sqrt_n + 0.26 + 0.5 / sqrt_n);
  r.rejected = r.ks_modified > r.critical_1pct;
  r.dkw_band = std::sqrt(std::log(2.0 / 0.01) / (2.0 * n));

  const double t_max = std::min(events.back(), horizon);
  const std::size_t points = std::max<std::size_t>(curve_points, 2);
  for (std::size_t k = 1; k <= points; ++k) {
    const double t = t_max * static_cast<double>(k) / static_cast<double>(points);
    const auto above = static_cast<double>(events.end() - std::upper_bound(events.begin(), events.end(), t));
    r.survival.push_back({t, (above + static_cast<double>(r.censored)) / n, std::exp(-t / r.mean)});
  }
  return r;
}

} // namespace mixcpd
