#include "mixcpd/detector.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "mixcpd/errors.hpp"
#include "mixcpd/kernels.hpp"
#include "mixcpd/profile.hpp"
#include "mixcpd/stream_state.hpp"

namespace mixcpd {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool is_windowed(Rule rule) {
  switch (rule) {
  case Rule::t1:
  case Rule::t2:
  case Rule::t3:
  case Rule::t4:
  case Rule::tmax:
  case Rule::tv:
    return true;
  default:
    return false;
  }
}

bool uses_delta(Rule rule) { return rule == Rule::t1 || rule == Rule::t3 || rule == Rule::tv || rule == Rule::mei; }

void check_number(double v, const char *what) {
  if (!std::isfinite(v))
    throw ParameterError(std::string(what) + " must be finite");
}

// +inf is allowed and disables stopping (used to record score maxima)
void check_threshold(double b, const char *what) {
  if (std::isnan(b) || b == -std::numeric_limits<double>::infinity())
    throw ParameterError(std::string(what) + " must be a number or +inf");
}

} // namespace

std::string_view to_string(Rule rule) {
  switch (rule) {
  case Rule::t1:
    return "T1";
  case Rule::t2:
    return "T2";
  case Rule::t3:
    return "T3";
  case Rule::t4:
    return "T4";
  case Rule::tmax:
    return "Tmax";
  case Rule::mei:
    return "Mei";
  case Rule::tv:
    return "TV";
  case Rule::profile:
    return "profile";
  case Rule::parallel:
    return "parallel";
  }
  return "unknown";
}

Rule parse_rule(std::string_view name) {
  std::string lower;
  for (char c : name)
    if (c != '_')
      lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  for (Rule r : {Rule::t1, Rule::t2, Rule::t3, Rule::t4, Rule::tmax, Rule::mei, Rule::tv, Rule::profile,
                 Rule::parallel}) {
    std::string canon;
    for (char c : to_string(r))
      canon.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (canon == lower)
      return r;
  }
  if (lower == "max")
    return Rule::tmax;
  throw ParameterError("unknown rule '" + std::string(name) + "'");
}

GSpec rule_gspec(Rule rule, double p0, double delta) {
  switch (rule) {
  case Rule::t1:
    return GSpec::fixed_mixture(p0, delta);
  case Rule::t2:
    return GSpec::mixture(p0);
  case Rule::t3:
    return GSpec::fixed_hard(p0, delta);
  case Rule::t4:
    return GSpec::hard(p0);
  case Rule::tmax:
    return {GKind::max, 1.0, delta};
  default:
    throw ParameterError("rule " + std::string(to_string(rule)) + " has no per-stream score family");
  }
}

void DetectorConfig::validate() const {
  check_threshold(b, "threshold b");
  check_number(p0, "p0");
  check_number(delta, "delta");
  if (m0 < 1)
    throw WindowError("m0 must be at least 1");
  if (m1 < m0)
    throw WindowError("m1 must be at least m0");
  if (rule != Rule::parallel && !components.empty())
    throw ParameterError("components are only meaningful for the parallel rule");
  if (rule == Rule::parallel) {
    if (components.empty())
      throw ParameterError("parallel rule needs at least one component");
    for (const auto &c : components) {
      if (!is_windowed(c.rule))
        throw ParameterError("parallel components must be window-limited rules");
      check_threshold(c.b, "component threshold");
      if (c.rule != Rule::tv)
        rule_gspec(c.rule, c.p0, c.delta).validate();
      else if (!(c.delta > 0.0))
        throw ParameterError("nominal mean delta must be positive");
    }
    return;
  }
  if (rule == Rule::profile) {
    if (!profile)
      throw ParameterError("profile rule needs grid settings");
    if (profile->rows == 0 || profile->cols == 0)
      throw ParameterError("profile grid must be nonempty");
    if (!(profile->spacing > 0.0))
      throw ParameterError("sensor spacing must be positive");
    if (profile->betas.empty())
      throw ParameterError("profile needs at least one beta");
    for (double beta : profile->betas)
      if (!(beta > 0.0))
        throw ParameterError("profile beta must be positive");
    if (profile->candidate_spacing < 0.0)
      throw ParameterError("candidate spacing must be nonnegative");
    return;
  }
  if (uses_delta(rule) && !(delta > 0.0))
    throw ParameterError("nominal mean delta must be positive");
  if (rule != Rule::mei && rule != Rule::tv && !(p0 > 0.0 && p0 <= 1.0))
    throw ParameterError("p0 must lie in (0, 1]");
}

nlohmann::json to_json(const DetectorConfig &c) {
  nlohmann::json j;
  j["rule"] = std::string(to_string(c.rule));
  j["p0"] = c.p0;
  j["delta"] = c.delta;
  j["b"] = c.b;
  j["m0"] = c.m0;
  j["m1"] = c.m1;
  if (!c.components.empty()) {
    j["components"] = nlohmann::json::array();
    for (const auto &comp : c.components)
      j["components"].push_back(
          {{"rule", std::string(to_string(comp.rule))}, {"p0", comp.p0}, {"delta", comp.delta}, {"b", comp.b}});
  }
  if (c.profile) {
    j["profile"] = {{"rows", c.profile->rows},
                    {"cols", c.profile->cols},
                    {"spacing", c.profile->spacing},
                    {"betas", c.profile->betas},
                    {"candidate_spacing", c.profile->candidate_spacing}};
  }
  return j;
}

DetectorConfig detector_config_from_json(const nlohmann::json &j) {
  DetectorConfig c;
  c.rule = parse_rule(j.at("rule").get<std::string>());
  c.p0 = j.at("p0").get<double>();
  c.delta = j.at("delta").get<double>();
  c.b = j.at("b").get<double>();
  c.m0 = j.at("m0").get<std::int64_t>();
  c.m1 = j.at("m1").get<std::int64_t>();
  if (j.contains("components")) {
    for (const auto &cj : j.at("components"))
      c.components.push_back({parse_rule(cj.at("rule").get<std::string>()), cj.at("p0").get<double>(),
                              cj.at("delta").get<double>(), cj.at("b").get<double>()});
  }
  if (j.contains("profile")) {
    const auto &pj = j.at("profile");
    ProfileSettings p;
    p.rows = pj.at("rows").get<std::size_t>();
    p.cols = pj.at("cols").get<std::size_t>();
    p.spacing = pj.at("spacing").get<double>();
    p.betas = pj.at("betas").get<std::vector<double>>();
    p.candidate_spacing = pj.at("candidate_spacing").get<double>();
    c.profile = p;
  }
  return c;
}

namespace {

/// One window-limited score: max over w of reduce(row(t), row(t - w)).
class WindowTerm {
public:
  WindowTerm(Rule rule, double p0, double delta, std::int64_t m0, std::int64_t m1)
      : rule_(rule), gspec_(rule == Rule::tv ? GSpec::fixed_mixture(1.0, delta) : rule_gspec(rule, p0, delta)),
        m0_(m0), m1_(m1) {
    using simd::Transform;
    switch (rule) {
    case Rule::t1:
      params_ = simd::TermParams::make(Transform::fixed_mixture, p0);
      break;
    case Rule::t2:
      params_ = simd::TermParams::make(Transform::glr_mixture, p0);
      break;
    case Rule::t3:
      params_ = simd::TermParams::make(Transform::fixed_hard, p0);
      break;
    case Rule::t4:
      params_ = simd::TermParams::make(Transform::glr_hard, p0);
      break;
    case Rule::tmax:
      params_ = simd::TermParams::make(Transform::glr_max, 1.0);
      break;
    case Rule::tv:
      params_ = simd::TermParams::make(Transform::linear, 1.0);
      break;
    default:
      throw ParameterError("not a window-limited rule");
    }
    fixed_ = rule == Rule::t1 || rule == Rule::t3 || rule == Rule::tv;
    scale_.resize(static_cast<std::size_t>(m1) + 1);
    offset_.resize(static_cast<std::size_t>(m1) + 1);
    for (std::int64_t w = 1; w <= m1; ++w) {
      const auto i = static_cast<std::size_t>(w);
      scale_[i] = fixed_ ? delta : 1.0 / std::sqrt(static_cast<double>(w));
      offset_[i] = fixed_ ? -0.5 * delta * delta * static_cast<double>(w) : 0.0;
    }
  }

  struct Result {
    double score = kNegInf;
    std::int64_t k = -1;
  };

  Result scan(const StreamState &state, const simd::KernelSet &ks) const {
    Result best;
    const std::int64_t t = state.time();
    const std::int64_t w_hi = std::min(t, m1_);
    if (w_hi < m0_)
      return best;
    const double *head = state.row(t);
    const std::size_t n = state.n_streams();
    for (std::int64_t w = m0_; w <= w_hi; ++w) {
      const auto i = static_cast<std::size_t>(w);
      const double s = ks.reduce_window(params_, head, state.row(t - w), n, scale_[i], offset_[i]);
      // ascending w with strict comparison keeps the largest k on ties
      if (s > best.score) {
        best.score = s;
        best.k = t - w;
      }
    }
    return best;
  }

  std::vector<double> contributions(const StreamState &state, std::int64_t k) const {
    const std::int64_t t = state.time();
    if (k < 0 || k >= t || !state.addressable(k))
      return {};
    const auto w = static_cast<std::size_t>(t - k);
    const double *head = state.row(t);
    const double *tail = state.row(k);
    std::vector<double> out(state.n_streams());
    for (std::size_t n = 0; n < out.size(); ++n) {
      const double v = scale_[w] * (head[n] - tail[n]) + offset_[w];
      out[n] = rule_ == Rule::tv ? v : gspec_.value(v);
    }
    return out;
  }

private:
  Rule rule_;
  GSpec gspec_;
  simd::TermParams params_;
  bool fixed_ = false;
  std::int64_t m0_;
  std::int64_t m1_;
  std::vector<double> scale_;
  std::vector<double> offset_;
};

class WindowedDetector final : public Detector {
public:
  WindowedDetector(DetectorConfig config, std::size_t n_streams)
      : Detector(std::move(config)), state_(n_streams, static_cast<std::size_t>(config_.m1)),
        term_(config_.rule, config_.p0, config_.delta, config_.m0, config_.m1) {}

  Decision step(std::span<const double> y) override {
    state_.push(y);
    const auto r = term_.scan(state_, simd::kernels());
    last_k_ = r.k;
    Decision d;
    d.stop_time = state_.time();
    d.argmax_k = r.k;
    d.score = r.score;
    d.threshold = config_.b;
    d.stopped = r.k >= 0 && r.score >= config_.b;
    return d;
  }

  std::int64_t time() const noexcept override { return state_.time(); }
  std::size_t n_streams() const noexcept override { return state_.n_streams(); }
  std::vector<double> contributions() const override { return term_.contributions(state_, last_k_); }

  nlohmann::json snapshot() const override {
    return {{"config", to_json(config_)}, {"n_streams", state_.n_streams()}, {"state", state_.snapshot()},
            {"last_k", last_k_}};
  }

  void restore(const nlohmann::json &snap) {
    state_ = StreamState::restore(snap.at("state"));
    last_k_ = snap.at("last_k").get<std::int64_t>();
  }

private:
  StreamState state_;
  WindowTerm term_;
  std::int64_t last_k_ = -1;
};

class ParallelDetector final : public Detector {
public:
  ParallelDetector(DetectorConfig config, std::size_t n_streams)
      : Detector(std::move(config)), state_(n_streams, static_cast<std::size_t>(config_.m1)) {
    for (const auto &c : config_.components)
      terms_.emplace_back(c.rule, c.p0, c.delta, config_.m0, config_.m1);
    scores_.assign(terms_.size(), kNegInf);
  }

  Decision step(std::span<const double> y) override {
    state_.push(y);
    const auto &ks = simd::kernels();
    Decision d;
    d.stop_time = state_.time();
    double best_margin = kNegInf;
    for (std::size_t c = 0; c < terms_.size(); ++c) {
      const auto r = terms_[c].scan(state_, ks);
      scores_[c] = r.score;
      const double b = config_.components[c].b;
      const bool fired = r.k >= 0 && r.score >= b;
      const double margin = r.score - b;
      if (d.stopped)
        continue;
      // first firing component wins; otherwise report the one closest to its threshold
      if (fired || !d.component || margin > best_margin) {
        best_margin = margin;
        d.stopped = fired;
        d.argmax_k = r.k;
        d.score = r.score;
        d.threshold = b;
        d.component = c;
      }
    }
    last_k_ = d.argmax_k;
    last_component_ = d.component.value_or(0);
    return d;
  }

  std::int64_t time() const noexcept override { return state_.time(); }
  std::size_t n_streams() const noexcept override { return state_.n_streams(); }
  std::vector<double> contributions() const override {
    return terms_[last_component_].contributions(state_, last_k_);
  }
  std::vector<double> component_scores() const override { return scores_; }

  nlohmann::json snapshot() const override {
    return {{"config", to_json(config_)},
            {"n_streams", state_.n_streams()},
            {"state", state_.snapshot()},
            {"last_k", last_k_},
            {"last_component", last_component_}};
  }

  void restore(const nlohmann::json &snap) {
    state_ = StreamState::restore(snap.at("state"));
    last_k_ = snap.at("last_k").get<std::int64_t>();
    last_component_ = snap.at("last_component").get<std::size_t>();
  }

private:
  StreamState state_;
  std::vector<WindowTerm> terms_;
  std::vector<double> scores_;
  std::int64_t last_k_ = -1;
  std::size_t last_component_ = 0;
};

/// Sum over streams of CUSUM statistics W+, W_t = max(W_{t-1}, 0) + delta y_t - delta^2 / 2.
/// W_t+ equals the per-stream max over 0 <= k <= t of l_n(t, k, delta), so each stream uses its own k.
/// The recursion is not window limited.
class MeiDetector final : public Detector {
public:
  MeiDetector(DetectorConfig config, std::size_t n_streams)
      : Detector(std::move(config)), w_(n_streams, 0.0), start_(n_streams, 0) {
    if (n_streams == 0)
      throw ParameterError("stream count must be positive");
  }

  Decision step(std::span<const double> y) override {
    if (y.size() != w_.size())
      throw DimensionError("observation has " + std::to_string(y.size()) + " entries, expected " +
                           std::to_string(w_.size()));
    ++time_;
    const double delta = config_.delta;
    const double drift = 0.5 * delta * delta;
    double sum = 0.0;
    double top = kNegInf;
    std::int64_t top_k = 0;
    for (std::size_t n = 0; n < w_.size(); ++n) {
      if (w_[n] <= 0.0) {
        w_[n] = 0.0;
        start_[n] = time_ - 1;
      }
      w_[n] += delta * y[n] - drift;
      const double wp = std::max(w_[n], 0.0);
      sum += wp;
      if (wp > top) {
        top = wp;
        top_k = wp > 0.0 ? start_[n] : time_;
      }
    }
    Decision d;
    d.stop_time = time_;
    d.argmax_k = top_k;
    d.score = sum;
    d.threshold = config_.b;
    d.stopped = sum >= config_.b;
    return d;
  }

  std::int64_t time() const noexcept override { return time_; }
  std::size_t n_streams() const noexcept override { return w_.size(); }
  std::vector<double> contributions() const override {
    std::vector<double> out(w_.size());
    for (std::size_t n = 0; n < w_.size(); ++n)
      out[n] = std::max(w_[n], 0.0);
    return out;
  }

  nlohmann::json snapshot() const override {
    return {{"config", to_json(config_)}, {"n_streams", w_.size()}, {"time", time_}, {"w", w_}, {"start", start_}};
  }

  void restore(const nlohmann::json &snap) {
    time_ = snap.at("time").get<std::int64_t>();
    w_ = snap.at("w").get<std::vector<double>>();
    start_ = snap.at("start").get<std::vector<std::int64_t>>();
  }

private:
  std::int64_t time_ = 0;
  std::vector<double> w_;
  std::vector<std::int64_t> start_;
};

} // namespace

std::unique_ptr<Detector> make_detector(const DetectorConfig &config, std::size_t n_streams) {
  config.validate();
  if (n_streams == 0)
    throw ParameterError("stream count must be positive");
  switch (config.rule) {
  case Rule::mei:
    return std::make_unique<MeiDetector>(config, n_streams);
  case Rule::parallel:
    return std::make_unique<ParallelDetector>(config, n_streams);
  case Rule::profile:
    return make_profile_detector(config, n_streams);
  default:
    return std::make_unique<WindowedDetector>(config, n_streams);
  }
}

std::unique_ptr<Detector> restore_detector(const nlohmann::json &snap) {
  const DetectorConfig config = detector_config_from_json(snap.at("config"));
  const auto n_streams = snap.at("n_streams").get<std::size_t>();
  auto det = make_detector(config, n_streams);
  if (auto *w = dynamic_cast<WindowedDetector *>(det.get()))
    w->restore(snap);
  else if (auto *p = dynamic_cast<ParallelDetector *>(det.get()))
    p->restore(snap);
  else if (auto *m = dynamic_cast<MeiDetector *>(det.get()))
    m->restore(snap);
  else
    restore_profile_detector(*det, snap);
  return det;
}

Decision run_until_stop(Detector &detector, std::span<const std::vector<double>> rows) {
  Decision last;
  for (const auto &row : rows) {
    last = detector.step(row);
    if (last.stopped)
      break;
  }
  return last;
}

} // namespace mixcpd
