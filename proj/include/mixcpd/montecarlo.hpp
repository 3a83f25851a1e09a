#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mixcpd/detector.hpp"
#include "mixcpd/stream_state.hpp"

namespace mixcpd {

enum class RunMode { full_run, tail_shortcut };

/// full_run: the sample mean of stopping times. tail_shortcut: stop each trial at horizon m and
/// invert the exponential law, ARL = -m / log(1 - p_hat).
struct TrialPlan {
  DetectorConfig detector;
  Scenario scenario;
  std::size_t n_trials = 200;
  std::int64_t horizon = 0; ///< m; required for tail_shortcut
  std::int64_t cap = 0;     ///< hard cap for full runs; 0 selects the mode default
  std::uint64_t seed = 1;
  RunMode mode = RunMode::tail_shortcut;
  unsigned threads = 0; ///< 0 selects std::thread::hardware_concurrency

  void validate() const;
};

struct TrialOutcome {
  std::int64_t time = 0; ///< stopping time, or the limit when censored
  bool censored = false;
  double max_score = 0.0; ///< largest detection statistic seen
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_trials = 0;
  std::size_t censored = 0;
  std::string method;
  std::vector<std::int64_t> times;
};

enum class DelayCount {
  stopping_time, ///< delay = T - kappa
  inclusive,     ///< delay = T - kappa + 1, counting the alarm step itself
};

/// One trial, deterministic in (plan.seed, index); runs until a stop or `limit` steps.
TrialOutcome run_trial(const TrialPlan &plan, std::size_t index, std::int64_t limit);

/// Calls fn(i) for i < n on a pool of workers; results must be written to per-index slots.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)> &fn);

Estimate estimate_arl(const TrialPlan &plan);
Estimate estimate_edd(const TrialPlan &plan, DelayCount count = DelayCount::stopping_time);

/// Exponential inversion of a tail frequency p_hat at horizon m, with its delta-method standard error.
Estimate arl_from_tail(double p_hat, std::int64_t horizon, std::size_t n_trials);

struct TailTarget {
  std::int64_t horizon = 0; ///< m
  double alpha = 0.05;      ///< target P{T <= m}
};

struct EmpiricalCalibration {
  /// One threshold per component (a single entry for non-parallel rules).
  std::vector<double> thresholds;
  /// Per-trial maxima of each component's statistic within the horizon: max_scores[component][trial].
  std::vector<std::vector<double>> max_scores;
  std::size_t n_trials = 0;
};

/// Common-random-number calibration: each trial's maximal statistic within the horizon is computed
/// once with the threshold disabled, then b is the (1 - alpha) sample quantile.
EmpiricalCalibration calibrate_empirical(const DetectorConfig &detector, std::size_t n_streams, TailTarget target,
                                         std::size_t n_trials, std::uint64_t seed, unsigned threads = 0);

/// Type-7 (linear interpolation) quantile of the maxima at level 1 - alpha; alpha >= 1 gives 0.
double threshold_for_alpha(std::span<const double> max_scores, double alpha);

struct SurvivalPoint {
  double t = 0.0;
  double empirical = 0.0; ///< fraction of stopping times > t
  double fitted = 0.0;    ///< exp(-t / mean)
};

struct ExponentialityReport {
  std::size_t n = 0;
  std::size_t censored = 0;
  double mean = 0.0;           ///< exponential MLE of the mean (censoring-aware)
  double ks_distance = 0.0;    ///< sup |F_n - F_fit| over uncensored data
  double ks_modified = 0.0;    ///< Stephens' (D - 0.2/n)(sqrt n + 0.26 + 0.5/sqrt n)
  double critical_1pct = 1.308;
  bool rejected = false;
  double dkw_band = 0.0;       ///< 99% Dvoretzky-Kiefer-Wolfowitz half-width
  std::vector<SurvivalPoint> survival;
};

/// times[i] with censored[i] marking runs stopped at the horizon (censored may be empty).
ExponentialityReport exponentiality_report(std::span<const std::int64_t> times, std::span<const bool> censored = {},
                                           std::size_t curve_points = 20);

} // namespace mixcpd
