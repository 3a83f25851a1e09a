#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mixcpd/gspec.hpp"
#include "mixcpd/quadrature.hpp"
#include "mixcpd/special.hpp"
#include "mixcpd/stream_state.hpp"

namespace mixcpd {

struct Moments {
  double psi = 0.0;
  double psi_dot = 0.0;
  double psi_ddot = 0.0;
  double gamma = 0.0;
};

/// Null law of one stream's score, g(U) with U standard normal.
///
/// GLR kinds score U directly. Fixed-mean kinds score l = delta sqrt(w) U - delta^2 w / 2
/// for a window length w, so the model is per w. Tilted integrals are evaluated relative
/// to the peak of theta g - u^2/2, which keeps large theta finite for fixed-mean kinds.
class NullScoreModel {
public:
  explicit NullScoreModel(GSpec g, std::int64_t window = 1, QuadOptions quad = {});

  const GSpec &g() const noexcept { return g_; }
  std::int64_t window() const noexcept { return window_; }
  /// Open interval of admissible theta: (1e-8, 1 - 1e-8) for square-growth kinds, (1e-8, inf) otherwise.
  std::pair<double, double> theta_domain() const noexcept;

  double psi(double theta) const { return moments(theta).psi; }
  double psi_dot(double theta) const;
  double psi_ddot(double theta) const { return moments(theta).psi_ddot; }
  double gamma(double theta) const { return moments(theta).gamma; }
  Moments moments(double theta) const;
  /// E g(U), the limit of psi_dot at theta -> 0.
  double null_mean() const;

private:
  struct Tilted {
    double log_shift;
    double m0, m1, m2, mg;
  };
  Tilted tilted(double theta, bool second_order) const;
  double score(double u) const noexcept;
  double score_slope(double u) const noexcept;
  double zero_region_end() const noexcept;
  std::vector<double> breakpoints(double theta) const;
  void check_theta(double theta) const;

  GSpec g_;
  std::int64_t window_;
  QuadOptions quad_;
  double a_ = 1.0;  // dl/du
  double c_ = 0.0;  // l at u = 0
};

/// theta solving psi_dot(theta) = b / N.
/// Throws CalibrationError("threshold below null mean") when b/N <= E g(U), ConvergenceError
/// when the root is pushed against the domain boundary.
double solve_theta(const NullScoreModel &model, double b, std::size_t n_streams);

struct WindowRate {
  std::int64_t w = 0;
  double theta = 0.0;
  double log_rate = 0.0;
};

struct ArlResult {
  double arl = 0.0;
  double log_arl = 0.0;
  double theta = 0.0;
  Moments moments;
  double log_h = 0.0;       ///< log H(N, theta)
  double nu_integral = 0.0; ///< integral of y nu^2(y) over [lower, upper]
  double lower = 0.0;
  double upper = 0.0;
  std::vector<WindowRate> windows; ///< per-w rates (fixed-mean form only)
};

/// Window-limited ARL under no change for sums of GLR-kind scores.
ArlResult arl_theorem1(const GSpec &g, std::size_t n_streams, double b, std::int64_t m0, std::int64_t m1,
                       NuMethod method = NuMethod::approximation);

/// Fixed-mean kinds: one theta per window length w, ARL = 1 / sum_w lambda_w.
ArlResult arl_fixed_mean(const GSpec &g, std::size_t n_streams, double b, std::int64_t m0, std::int64_t m1,
                         NuMethod method = NuMethod::approximation);

/// Dispatches to arl_theorem1 or arl_fixed_mean by the kind of g.
ArlResult arl(const GSpec &g, std::size_t n_streams, double b, std::int64_t m0, std::int64_t m1);

struct TailProb {
  double linear = 0.0;      ///< min(1, m / ARL)
  double exponential = 0.0; ///< 1 - exp(-m / ARL)
};

TailProb tail_prob_from_arl(double arl, double m);
TailProb tail_prob(const GSpec &g, std::size_t n_streams, double b, std::int64_t m0, std::int64_t m1, double m);

/// b with arl(g, N, b, m0, m1) = target_arl to relative 1e-6 or better. Throws for target_arl <= m0.
double calibrate_threshold(const GSpec &g, std::size_t n_streams, double target_arl, std::int64_t m0,
                           std::int64_t m1);

/// Overshoot constant rho(Delta) = Delta^2/4 + 1 - sum_i E[S_i-] / i of the walk with Normal(Delta^2/2, Delta^2) steps.
double rho(double delta_norm);
/// E min_{t>=0} S_t = rho - 1 - Delta^2/4.
double walk_min_mean(double delta_norm);

/// E g(U) for standard normal U (GLR kinds) or E g(l) with l ~ Normal(-delta^2 w/2, delta^2 w) (fixed kinds).
double expected_g_null(const GSpec &g, std::int64_t window = 1);

/// E g(mean + sd Z) for standard normal Z, with g acting on its natural argument.
double expected_g_normal(const GSpec &g, double mean, double sd);

struct EddResult {
  double value = 0.0;
  double delta_norm = 0.0;
  double rho = 0.0;
  bool window_warning = false; ///< m1 < 2 (2b / Delta^2)
  bool saturated = false;      ///< crude rule never reached b within m1
  std::string note;
};

/// Expected detection delay with the change at kappa = 0, for T2/T4 (GLR mixture or hard kinds).
EddResult edd_theorem2(const GSpec &g, std::size_t n_streams, double b, const Scenario &scenario,
                       std::int64_t m1 = 200);

/// Crude EDD. GLR kinds: t solving E0 Z_{0,t} = b. Fixed kinds: t0 = b / [delta (sum mu - |N| delta / 2)]
/// corrected by the affected log p0 terms, the unaffected E g(l_{0,t0}) terms, and the overshoot and
/// pre-change minimum of the affected log-likelihood walk.
EddResult edd_crude(const GSpec &g, std::size_t n_streams, double b, const Scenario &scenario,
                    std::int64_t m0 = 1, std::int64_t m1 = 200);

} // namespace mixcpd
