#include "mixcpd/gspec.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "mixcpd/errors.hpp"

namespace mixcpd {

std::string_view to_string(GKind kind) {
  switch (kind) {
  case GKind::mixture:
    return "mixture";
  case GKind::hard:
    return "hard";
  case GKind::square:
    return "square";
  case GKind::max:
    return "max";
  case GKind::fixed_mixture:
    return "fixed-mixture";
  case GKind::fixed_hard:
    return "fixed-hard";
  }
  return "unknown";
}

GKind parse_gkind(std::string_view name) {
  for (GKind k : {GKind::mixture, GKind::hard, GKind::square, GKind::max, GKind::fixed_mixture, GKind::fixed_hard})
    if (to_string(k) == name)
      return k;
  throw ParameterError("unknown score kind '" + std::string(name) + "'");
}

namespace {

void check_p0(double p0) {
  if (!(p0 > 0.0 && p0 <= 1.0))
    throw ParameterError("p0 must lie in (0, 1], got " + std::to_string(p0));
}

} // namespace

void GSpec::validate() const {
  check_p0(p0);
  if (is_fixed_mean() && !(delta > 0.0))
    throw ParameterError("nominal mean delta must be positive");
}

double GSpec::value(double arg) const noexcept {
  switch (kind) {
  case GKind::mixture: {
    const double u = std::max(arg, 0.0);
    return mixture_log(0.5 * u * u, p0);
  }
  case GKind::hard: {
    const double u = std::max(arg, 0.0);
    return std::max(0.5 * u * u + std::log(p0), 0.0);
  }
  case GKind::square:
  case GKind::max: {
    const double u = std::max(arg, 0.0);
    return 0.5 * u * u;
  }
  case GKind::fixed_mixture:
    return mixture_log(std::max(arg, 0.0), p0);
  case GKind::fixed_hard:
    return std::max(arg + std::log(p0), 0.0);
  }
  return 0.0;
}

double GSpec::derivative(double arg) const noexcept {
  if (arg <= zero_until())
    return 0.0;
  switch (kind) {
  case GKind::mixture: {
    // d/du log(1-p0+p0 e^{u^2/2}) = u / (1 + (1-p0)/p0 e^{-u^2/2})
    const double x = 0.5 * arg * arg;
    return arg / (1.0 + (1.0 - p0) / p0 * std::exp(-x));
  }
  case GKind::hard:
  case GKind::square:
  case GKind::max:
    return arg;
  case GKind::fixed_mixture:
    return 1.0 / (1.0 + (1.0 - p0) / p0 * std::exp(-arg));
  case GKind::fixed_hard:
    return 1.0;
  }
  return 0.0;
}

double GSpec::zero_until() const noexcept {
  switch (kind) {
  case GKind::hard:
    return std::sqrt(-2.0 * std::log(p0));
  case GKind::fixed_hard:
    return -std::log(p0);
  default:
    return 0.0;
  }
}

double score_mixture_glr(std::span<const double> u, double p0) {
  check_p0(p0);
  double sum = 0.0;
  for (double v : u) {
    const double up = std::max(v, 0.0);
    sum += mixture_log(0.5 * up * up, p0);
  }
  return sum;
}

double score_hard_glr(std::span<const double> u, double p0) {
  check_p0(p0);
  const double log_p0 = std::log(p0);
  double sum = 0.0;
  for (double v : u) {
    const double up = std::max(v, 0.0);
    sum += std::max(0.5 * up * up + log_p0, 0.0);
  }
  return sum;
}

double score_fixed(std::span<const double> ell, double p0, FixedVariant variant) {
  check_p0(p0);
  const double log_p0 = std::log(p0);
  double sum = 0.0;
  for (double l : ell) {
    if (variant == FixedVariant::mixture)
      sum += mixture_log(std::max(l, 0.0), p0);
    else
      sum += std::max(l + log_p0, 0.0);
  }
  return sum;
}

} // namespace mixcpd
