#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>

namespace mixcpd {

/// Per-stream score families.
///
/// GLR kinds act on the standardized statistic u = U[n,k,t]:
///   mixture        log(1 - p0 + p0 exp((u+)^2 / 2))
///   hard           [(u+)^2 / 2 + log p0]+
///   square         (u+)^2 / 2                      (mixture at p0 = 1)
///   max            (u+)^2 / 2, combined by max over streams instead of sum
/// Fixed-mean kinds act on l = l_n(t, k, delta):
///   fixed_mixture  log(1 - p0 + p0 exp(l+))
///   fixed_hard     [l + log p0]+
enum class GKind { mixture, hard, square, max, fixed_mixture, fixed_hard };

std::string_view to_string(GKind kind);
GKind parse_gkind(std::string_view name);

struct GSpec {
  GKind kind = GKind::mixture;
  double p0 = 1.0;
  double delta = 1.0;

  void validate() const;

  bool is_fixed_mean() const noexcept { return kind == GKind::fixed_mixture || kind == GKind::fixed_hard; }
  /// Square-growth kinds have a cumulant generating function only for theta < 1.
  bool is_square_growth() const noexcept { return !is_fixed_mean(); }

  /// Score of one stream as a function of its natural argument (u for GLR kinds, l for fixed kinds).
  double value(double arg) const noexcept;
  /// Derivative with respect to the natural argument; the kink at the origin takes the left value 0.
  double derivative(double arg) const noexcept;
  /// Largest argument at which the score is still exactly zero.
  double zero_until() const noexcept;

  static GSpec mixture(double p0) { return {GKind::mixture, p0, 1.0}; }
  static GSpec hard(double p0) { return {GKind::hard, p0, 1.0}; }
  static GSpec square() { return {GKind::square, 1.0, 1.0}; }
  static GSpec fixed_mixture(double p0, double delta) { return {GKind::fixed_mixture, p0, delta}; }
  static GSpec fixed_hard(double p0, double delta) { return {GKind::fixed_hard, p0, delta}; }
};

/// log(1 - p0 + p0 e^x) for x >= 0, evaluated as x + log(p0 + (1 - p0) e^{-x}) so large x never overflows.
inline double mixture_log(double x, double p0) noexcept {
  if (x <= 0.0)
    return 0.0;
  return x + std::log(p0 + (1.0 - p0) * std::exp(-x));
}

/// Sum over streams of log(1 - p0 + p0 exp[(u+)^2 / 2]).
double score_mixture_glr(std::span<const double> u, double p0);

/// Sum over streams of [(u+)^2 / 2 + log p0]+.
double score_hard_glr(std::span<const double> u, double p0);

enum class FixedVariant { mixture, hard };

/// Sum over streams of log(1 - p0 + p0 exp[l+]) (mixture) or [l + log p0]+ (hard).
double score_fixed(std::span<const double> ell, double p0, FixedVariant variant);

} // namespace mixcpd
