#include "mixcpd/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mixcpd/errors.hpp"

namespace mixcpd {

namespace {

constexpr double kThetaFloor = 1e-8;
constexpr double kLog2Pi = 1.83787706640934548356;
constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity())
    return b;
  if (b == -std::numeric_limits<double>::infinity())
    return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void check_windows(std::int64_t m0, std::int64_t m1) {
  if (m0 < 1)
    throw WindowError("m0 must be at least 1");
  if (m1 <= m0)
    throw WindowError("m1 must exceed m0");
}

void check_streams(std::size_t n) {
  if (n == 0)
    throw ParameterError("stream count must be positive");
}

std::vector<double> sorted_unique(std::vector<double> pts, double lo, double hi) {
  std::vector<double> out;
  out.reserve(pts.size() + 2);
  out.push_back(lo);
  for (double p : pts)
    if (p > lo && p < hi)
      out.push_back(p);
  out.push_back(hi);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

} // namespace

NullScoreModel::NullScoreModel(GSpec g, std::int64_t window, QuadOptions quad)
    : g_(g), window_(window), quad_(quad) {
  g_.validate();
  if (window < 1)
    throw WindowError("window length must be at least 1");
  if (g_.is_fixed_mean()) {
    const double w = static_cast<double>(window);
    a_ = g_.delta * std::sqrt(w);
    c_ = -0.5 * g_.delta * g_.delta * w;
  }
}

std::pair<double, double> NullScoreModel::theta_domain() const noexcept {
  if (g_.is_square_growth())
    return {kThetaFloor, 1.0 - kThetaFloor};
  return {kThetaFloor, std::numeric_limits<double>::infinity()};
}

void NullScoreModel::check_theta(double theta) const {
  const auto [lo, hi] = theta_domain();
  if (!(theta >= lo && theta <= hi)) {
    if (g_.is_square_growth())
      throw DomainError("theta must lie in (0, 1) for square-growth score kinds, got " + std::to_string(theta));
    throw DomainError("theta must be positive, got " + std::to_string(theta));
  }
}

double NullScoreModel::score(double u) const noexcept { return g_.value(a_ * u + c_); }

double NullScoreModel::score_slope(double u) const noexcept { return a_ * g_.derivative(a_ * u + c_); }

double NullScoreModel::zero_region_end() const noexcept { return (g_.zero_until() - c_) / a_; }

std::vector<double> NullScoreModel::breakpoints(double theta) const {
  const double u0 = zero_region_end();
  std::vector<double> pts;
  // point where the mixture switches from ~0 to the linear/quadratic branch
  const double log_inv_p0 = -std::log(g_.p0);
  if (!g_.is_fixed_mean()) {
    const double sigma = 1.0 / std::sqrt(1.0 - std::min(theta, 1.0 - kThetaFloor));
    pts.push_back(std::sqrt(2.0 * log_inv_p0));
    for (double k : {0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0})
      pts.push_back(u0 + sigma * k);
    return sorted_unique(std::move(pts), u0, u0 + 40.0 * sigma);
  }
  const double peak = std::max(u0, theta * a_);
  const double start = std::max(u0, peak - 40.0);
  pts.push_back((log_inv_p0 - c_) / a_);
  for (double k : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    pts.push_back(peak - k);
    pts.push_back(peak + k);
  }
  pts.push_back(peak);
  return sorted_unique(std::move(pts), start, peak + 40.0);
}

NullScoreModel::Tilted NullScoreModel::tilted(double theta, bool second_order) const {
  const double u0 = zero_region_end();
  double shift = 0.0;
  if (g_.is_fixed_mean()) {
    const double peak = std::max(u0, theta * a_);
    shift = std::max(0.0, theta * score(peak) - 0.5 * peak * peak);
  }
  const auto pts = breakpoints(theta);
  const auto weight = [&](double u) { return kInvSqrt2Pi * std::exp(theta * score(u) - 0.5 * u * u - shift); };

  Tilted t{shift, 0.0, 0.0, 0.0, 0.0};
  t.m0 = normal_cdf(u0) * std::exp(-shift) + integrate_pieces(weight, pts, quad_).value;
  t.m1 = integrate_pieces([&](double u) { return weight(u) * score(u); }, pts, quad_).value;
  if (second_order) {
    t.m2 = integrate_pieces(
               [&](double u) {
                 const double s = score(u);
                 return weight(u) * s * s;
               },
               pts, quad_)
               .value;
    t.mg = integrate_pieces(
               [&](double u) {
                 const double d = score_slope(u);
                 return weight(u) * d * d;
               },
               pts, quad_)
               .value;
  }
  return t;
}

double NullScoreModel::psi_dot(double theta) const {
  check_theta(theta);
  const Tilted t = tilted(theta, false);
  return t.m1 / t.m0;
}

Moments NullScoreModel::moments(double theta) const {
  check_theta(theta);
  const Tilted t = tilted(theta, true);
  Moments m;
  m.psi = std::log(t.m0) + t.log_shift;
  m.psi_dot = t.m1 / t.m0;
  m.psi_ddot = t.m2 / t.m0 - m.psi_dot * m.psi_dot;
  m.gamma = 0.5 * theta * theta * t.mg / t.m0;
  return m;
}

double NullScoreModel::null_mean() const {
  const auto pts = breakpoints(0.0);
  return integrate_pieces([&](double u) { return normal_pdf(u) * score(u); }, pts, quad_).value;
}

double solve_theta(const NullScoreModel &model, double b, std::size_t n_streams) {
  check_streams(n_streams);
  const double target = b / static_cast<double>(n_streams);
  const double mean = model.null_mean();
  if (!(target > mean))
    throw CalibrationError("threshold below null mean: b/N = " + std::to_string(target) +
                           " <= E g(U) = " + std::to_string(mean));
  const auto [lo, hi_domain] = model.theta_domain();
  const auto f = [&](double th) { return model.psi_dot(th) - target; };
  if (f(lo) > 0.0)
    throw ConvergenceError("theta root below the domain floor; b/N is too close to the null mean");
  double hi = hi_domain;
  if (!std::isfinite(hi)) {
    hi = 1.0;
    while (f(hi) < 0.0) {
      hi *= 2.0;
      if (hi > 1e7)
        throw ConvergenceError("theta root not bracketed below 1e7");
    }
  } else if (f(hi) < 0.0) {
    throw ConvergenceError("theta root pushed against the domain boundary 1; threshold too large for this N");
  }
  return solve_bracketed(f, lo, hi, 1e-12);
}

ArlResult arl_theorem1(const GSpec &g, std::size_t n_streams, double b, std::int64_t m0, std::int64_t m1,
                       NuMethod method) {
  check_streams(n_streams);
  check_windows(m0, m1);
  if (g.is_fixed_mean())
    throw ParameterError("fixed-mean score kinds use arl_fixed_mean");
  const NullScoreModel model(g);
  const double n = static_cast<double>(n_streams);
  ArlResult r;
  r.theta = solve_theta(model, b, n_streams);
  r.moments = model.moments(r.theta);
  const auto &m = r.moments;
  r.log_h = std::log(r.theta) + 0.5 * (kLog2Pi + std::log(m.psi_ddot)) - std::log(m.gamma) - 0.5 * std::log(n) +
            n * (r.theta * m.psi_dot - m.psi);
  r.lower = std::sqrt(2.0 * n * m.gamma / static_cast<double>(m1));
  r.upper = std::sqrt(2.0 * n * m.gamma / static_cast<double>(m0));
  r.nu_integral = nu_integral(r.lower, r.upper, method);
  r.log_arl = r.log_h - std::log(r.nu_integral);
  r.arl = std::exp(r.log_arl);
  return r;
}

ArlResult arl_fixed_mean(const GSpec &g, std::size_t n_streams, double b, std::int64_t m0, std::int64_t m1,
                         NuMethod method) {
  check_streams(n_streams);
  check_windows(m0, m1);
  if (!g.is_fixed_mean())
    throw ParameterError("arl_fixed_mean needs a fixed-mean score kind");
  const double n = static_cast<double>(n_streams);
  ArlResult r;
  double log_total = -std::numeric_limits<double>::infinity();
  double best = log_total;
  for (std::int64_t w = m0; w <= m1; ++w) {
    const NullScoreModel model(g, w);
    const double theta = solve_theta(model, b, n_streams);
    const Moments m = model.moments(theta);
    const double x = std::sqrt(2.0 * n * m.gamma / static_cast<double>(w));
    const double log_rate = 2.0 * std::log(n) - n * (theta * m.psi_dot - m.psi) -
                            0.5 * (kLog2Pi + std::log(n * m.psi_ddot)) - std::log(theta) + 2.0 * std::log(m.gamma) +
                            2.0 * std::log(nu(x, method)) - 2.0 * std::log(static_cast<double>(w));
    r.windows.push_back({w, theta, log_rate});
    log_total = log_sum_exp(log_total, log_rate);
    if (log_rate > best) {
      best = log_rate;
      r.theta = theta;
      r.moments = m;
    }
  }
  r.log_arl = -log_total;
  r.arl = std::exp(r.log_arl);
  return r;
}

ArlResult arl(const GSpec &g, std::size_t n_streams, double b, std::int64_t m0, std::int64_t m1) {
  return g.is_fixed_mean() ? arl_fixed_mean(g, n_streams, b, m0, m1) : arl_theorem1(g, n_streams, b, m0, m1);
}

TailProb tail_prob_from_arl(double arl_value, double m) {
  if (!(arl_value > 0.0))
    throw DomainError("ARL must be positive");
  if (m <= 0.0)
    return {};
  const double lambda_m = m / arl_value;
  return {std::min(1.0, lambda_m), -std::expm1(-lambda_m)};
}

TailProb tail_prob(const GSpec &g, std::size_t n_streams, double b, std::int64_t m0, std::int64_t m1, double m) {
  if (m <= 0.0)
    return {};
  return tail_prob_from_arl(arl(g, n_streams, b, m0, m1).arl, m);
}

double calibrate_threshold(const GSpec &g, std::size_t n_streams, double target_arl, std::int64_t m0,
                           std::int64_t m1) {
  check_streams(n_streams);
  check_windows(m0, m1);
  if (!(target_arl > static_cast<double>(m0)))
    throw CalibrationError("target ARL must exceed m0 = " + std::to_string(m0));
  const double n = static_cast<double>(n_streams);
  double mean = 0.0;
  if (g.is_fixed_mean()) {
    for (std::int64_t w = m0; w <= std::min(m1, m0 + 20); ++w)
      mean = std::max(mean, expected_g_null(g, w));
  } else {
    mean = expected_g_null(g);
  }
  const double floor_b = n * mean;
  const double log_target = std::log(target_arl);
  const auto f = [&](double b) { return arl(g, n_streams, b, m0, m1).log_arl - log_target; };
  const auto safe_f = [&](double b, double fallback) {
    try {
      return f(b);
    } catch (const Error &) {
      return fallback;
    }
  };

  double step = std::max(1.0, 0.1 * floor_b);
  double hi = floor_b + step;
  while (safe_f(hi, -1.0) < 0.0) {
    step *= 2.0;
    hi = floor_b + step;
    if (step > 1e6)
      throw CalibrationError("could not bracket the threshold from above");
  }
  double lo = floor_b + 0.5 * step;
  while (safe_f(lo, 1.0) > 0.0) {
    lo = floor_b + 0.5 * (lo - floor_b);
    if (lo - floor_b < 1e-9 * std::max(1.0, floor_b))
      throw CalibrationError("target ARL is not reachable above the null mean");
  }
  return solve_bracketed(f, lo, hi, 1e-13);
}

double rho(double delta_norm) {
  if (!(delta_norm > 0.0) || !std::isfinite(delta_norm))
    throw DomainError("rho requires Delta > 0");
  double sum = 0.0;
  for (int i = 1; i <= 100000; ++i) {
    const double di = static_cast<double>(i);
    const double term = expected_negative_part(0.5 * di * delta_norm * delta_norm, std::sqrt(di) * delta_norm) / di;
    sum += term;
    if (term < 1e-12 * sum || term < 1e-300)
      break;
  }
  return 0.25 * delta_norm * delta_norm + 1.0 - sum;
}

double walk_min_mean(double delta_norm) { return rho(delta_norm) - 1.0 - 0.25 * delta_norm * delta_norm; }

double expected_g_null(const GSpec &g, std::int64_t window) { return NullScoreModel(g, window).null_mean(); }

double expected_g_normal(const GSpec &g, double mean, double sd) {
  g.validate();
  if (!(sd > 0.0))
    return g.value(mean);
  const double z0 = (g.zero_until() - mean) / sd;
  const double lo = std::max(z0, -40.0);
  const double hi = std::max(z0, 0.0) + 40.0;
  std::vector<double> pts;
  for (double k : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    pts.push_back(z0 + k);
    pts.push_back(-k);
    pts.push_back(k);
  }
  pts.push_back(0.0);
  const auto breaks = sorted_unique(std::move(pts), lo, hi);
  return integrate_pieces([&](double z) { return normal_pdf(z) * g.value(mean + sd * z); }, breaks,
                          {1e-11, 1e-15, 20})
      .value;
}

EddResult edd_theorem2(const GSpec &g, std::size_t n_streams, double b, const Scenario &scenario, std::int64_t m1) {
  check_streams(n_streams);
  g.validate();
  if (g.kind != GKind::mixture && g.kind != GKind::hard && g.kind != GKind::square)
    throw ParameterError("the delay approximation applies to the mixture and hard GLR scores only");
  scenario.validate();
  if (scenario.affected.empty())
    throw ParameterError("delay approximation needs a nonempty affected set");
  if (scenario.n_streams != n_streams)
    throw DimensionError("scenario stream count differs from N");
  EddResult r;
  r.delta_norm = scenario.signal_norm();
  const double d2 = r.delta_norm * r.delta_norm;
  const double k = static_cast<double>(scenario.affected.size());
  const double n = static_cast<double>(n_streams);
  r.rho = rho(r.delta_norm);
  const double bracket = b + r.rho - k * std::log(g.p0) - 0.5 * k + (r.rho - 1.0 - 0.25 * d2) -
                         (n - k) * expected_g_null(g);
  r.value = 2.0 / d2 * bracket;
  const double first_order = 2.0 * b / d2;
  if (static_cast<double>(m1) < 2.0 * first_order) {
    r.window_warning = true;
    r.note = "m1 = " + std::to_string(m1) + " is not large compared with 2b/Delta^2 = " + std::to_string(first_order);
  }
  return r;
}

EddResult edd_crude(const GSpec &g, std::size_t n_streams, double b, const Scenario &scenario, std::int64_t m0,
                    std::int64_t m1) {
  check_streams(n_streams);
  check_windows(m0, m1);
  g.validate();
  scenario.validate();
  if (scenario.affected.empty())
    throw ParameterError("delay approximation needs a nonempty affected set");
  if (scenario.n_streams != n_streams)
    throw DimensionError("scenario stream count differs from N");
  EddResult r;
  r.delta_norm = scenario.signal_norm();
  const double k = static_cast<double>(scenario.affected.size());
  const double n = static_cast<double>(n_streams);
  const double lo_t = static_cast<double>(m0);
  const double hi_t = static_cast<double>(m1);
  if (b <= 0.0) {
    r.value = lo_t;
    return r;
  }

  if (g.is_fixed_mean()) {
    const double delta = g.delta;
    double mu_sum = 0.0;
    for (double mu : scenario.means)
      mu_sum += mu;
    const double rate = delta * (mu_sum - 0.5 * k * delta);
    if (!(rate > 0.0)) {
      r.value = hi_t;
      r.saturated = true;
      r.note = "affected log-likelihood drift is not positive";
      return r;
    }
    const double t0 = b / rate;
    const double null_term = expected_g_normal(g, -0.5 * delta * delta * t0, delta * std::sqrt(t0));
    // ladder overshoot and pre-change minimum of the affected log-likelihood walk (drift rate, sd delta sqrt k),
    // scaled from the Normal(D^2/2, D^2) walk with the same drift-to-sd ratio
    const double sd = delta * std::sqrt(k);
    const double d_eq = 2.0 * rate / sd;
    r.rho = rho(d_eq);
    const double walk_terms = (sd / d_eq) * (r.rho + walk_min_mean(d_eq));
    r.value = (b + walk_terms - k * std::log(g.p0) - (n - k) * null_term) / rate;
  } else {
    const double null_part = (n - k) * expected_g_null(g);
    const auto expected_score = [&](double t) {
      double s = null_part;
      const double rt = std::sqrt(t);
      for (double mu : scenario.means)
        s += expected_g_normal(g, mu * rt, 1.0);
      return s - b;
    };
    if (expected_score(lo_t) >= 0.0) {
      r.value = lo_t;
      return r;
    }
    if (expected_score(hi_t) < 0.0) {
      r.value = hi_t;
      r.saturated = true;
      r.note = "expected score stays below b within m1";
      return r;
    }
    r.value = solve_bracketed(expected_score, lo_t, hi_t, 1e-10);
  }
  if (r.value > hi_t) {
    r.value = hi_t;
    r.saturated = true;
    r.note = "crude delay exceeds m1";
  }
  r.value = std::max(r.value, lo_t);
  return r;
}

} // namespace mixcpd
