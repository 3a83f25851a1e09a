#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mixcpd/gspec.hpp"

namespace mixcpd {

/// Stopping rules. Window-limited rules scan k with m0 <= t - k <= min(t, m1).
///   t1        sum_n log(1 - p0 + p0 exp[l_n+])           fixed mean delta
///   t2        sum_n log(1 - p0 + p0 exp[(U_n+)^2 / 2])
///   t3        sum_n [l_n + log p0]+                        fixed mean delta
///   t4        sum_n [(U_n+)^2 / 2 + log p0]+
///   tmax      max_n (U_n+)^2 / 2
///   mei       sum_n of per-stream CUSUM statistics (each stream has its own k)
///   tv        sum_n l_n                                    fixed mean delta
///   profile   matched filter over candidate source locations
///   parallel  first alarm among several window-limited components
enum class Rule { t1, t2, t3, t4, tmax, mei, tv, profile, parallel };

std::string_view to_string(Rule rule);
/// Accepts the lowercase or uppercase names ("T2", "t2", "Tmax", "Mei", ...).
Rule parse_rule(std::string_view name);

/// The per-stream score family a window-limited rule sums; throws for mei, profile and parallel.
GSpec rule_gspec(Rule rule, double p0, double delta);

struct ComponentConfig {
  Rule rule = Rule::t2;
  double p0 = 0.1;
  double delta = 1.0;
  double b = 0.0;

  bool operator==(const ComponentConfig &) const = default;
};

struct ProfileSettings {
  std::size_t rows = 25;
  std::size_t cols = 25;
  double spacing = 1.0;
  std::vector<double> betas{1.0};
  /// Candidate source lattice spacing; 0 selects half the sensor spacing.
  double candidate_spacing = 0.0;

  bool operator==(const ProfileSettings &) const = default;
};

struct DetectorConfig {
  Rule rule = Rule::t2;
  double p0 = 0.1;
  double delta = 1.0;
  double b = 0.0;
  std::int64_t m0 = 1;
  std::int64_t m1 = 200;
  std::vector<ComponentConfig> components;
  std::optional<ProfileSettings> profile;

  void validate() const;
};

nlohmann::json to_json(const DetectorConfig &config);
DetectorConfig detector_config_from_json(const nlohmann::json &j);

struct Decision {
  bool stopped = false;
  std::int64_t stop_time = 0;
  /// Maximizing change-point candidate; ties go to the largest k. -1 when no window is available yet.
  std::int64_t argmax_k = -1;
  /// Detection statistic at this step; -inf before the first full window (t < m0).
  double score = -std::numeric_limits<double>::infinity();
  /// Threshold the score was compared against (the firing component's for parallel).
  double threshold = 0.0;
  /// Parallel: index of the component with the largest score - b margin (the firing one on a stop).
  std::optional<std::size_t> component;
  /// Profile: index of the maximizing candidate source location.
  std::optional<std::size_t> argmax_z;
};

/// Online stopping rule. step() consumes one observation vector and evaluates the statistic at the new time.
/// A detector keeps evaluating after a stop; callers decide whether to continue.
class Detector {
public:
  virtual ~Detector() = default;

  virtual Decision step(std::span<const double> y) = 0;
  virtual std::int64_t time() const noexcept = 0;
  virtual std::size_t n_streams() const noexcept = 0;
  virtual nlohmann::json snapshot() const = 0;

  const DetectorConfig &config() const noexcept { return config_; }

  /// Per-stream contribution to the statistic at the last evaluated (k, component); empty if not available.
  virtual std::vector<double> contributions() const { return {}; }

  /// Score of each component at the last step (parallel rule only); empty otherwise.
  virtual std::vector<double> component_scores() const { return {}; }

protected:
  explicit Detector(DetectorConfig config) : config_(std::move(config)) {}
  DetectorConfig config_;
};

std::unique_ptr<Detector> make_detector(const DetectorConfig &config, std::size_t n_streams);
std::unique_ptr<Detector> restore_detector(const nlohmann::json &snapshot);

/// Runs the detector over rows until the first stop; returns the stopping decision or the last one.
Decision run_until_stop(Detector &detector, std::span<const std::vector<double>> rows);

} // namespace mixcpd
