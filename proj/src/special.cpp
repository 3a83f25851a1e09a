#include "mixcpd/special.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "mixcpd/errors.hpp"
#include "mixcpd/quadrature.hpp"

namespace mixcpd {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
constexpr double kInvSqrt2 = 0.707106781186547524400844362105;

void check_positive(double x) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw DomainError("nu requires a finite x > 0, got " + std::to_string(x));
}

// Integral over [c, inf) of Phi(-v) / v dv, after integrating by parts:
// -log(c) Phi(-c) + int_c^inf log(v) phi(v) dv.
double tail_log_integral(double c) {
  const double upper = std::max(c, 1.0) + 12.0;
  const auto f = [](double v) { return std::log(v) * normal_pdf(v); };
  const double body = integrate(f, c, upper, {1e-13, 1e-16, 25}).value;
  return -std::log(c) * normal_cdf(-c) + body;
}

} // namespace

double normal_pdf(double x) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x * kInvSqrt2); }

double expected_negative_part(double mean, double sd) noexcept {
  const double r = mean / sd;
  return sd * normal_pdf(r) - mean * normal_cdf(-r);
}

double expected_positive_part(double mean, double sd) noexcept {
  const double r = mean / sd;
  return sd * normal_pdf(r) + mean * normal_cdf(r);
}

double nu(double x) {
  check_positive(x);
  const double h = 0.5 * x;
  // Phi(h) - 1/2 via erf keeps full precision as x -> 0
  const double num = 0.5 * std::erf(h * kInvSqrt2);
  return (2.0 / x) * num / (h * normal_cdf(h) + normal_pdf(h));
}

double nu_series(double x) {
  check_positive(x);
  const double a = 0.5 * x;
  // terms vanish once a sqrt(n) exceeds ~9 (Phi(-9) ~ 1e-19)
  const double direct_terms = std::ceil((9.0 / a) * (9.0 / a));
  constexpr double kSplit = 256.0;
  double sum = 0.0;
  if (direct_terms <= 4.0 * kSplit) {
    for (double n = 1.0; n <= direct_terms; n += 1.0)
      sum += normal_cdf(-a * std::sqrt(n)) / n;
  } else {
    for (double n = 1.0; n < kSplit; n += 1.0)
      sum += normal_cdf(-a * std::sqrt(n)) / n;
    // Euler-Maclaurin for sum_{n >= M} f(n), f(s) = Phi(-a sqrt(s)) / s:
    // int_M^inf f + f(M)/2 - f'(M)/12
    const double m = kSplit;
    const double r = a * std::sqrt(m);
    const double f_m = normal_cdf(-r) / m;
    const double df_m = -normal_pdf(r) * a / (2.0 * std::sqrt(m) * m) - normal_cdf(-r) / (m * m);
    sum += 2.0 * tail_log_integral(r) + 0.5 * f_m - df_m / 12.0;
  }
  return 2.0 / (x * x) * std::exp(-2.0 * sum);
}

double nu(double x, NuMethod method) { return method == NuMethod::series ? nu_series(x) : nu(x); }

double nu_integral(double lo, double hi, NuMethod method) {
  if (!(lo > 0.0) || hi < lo)
    throw DomainError("nu integral requires 0 < lo <= hi");
  const auto f = [method](double y) {
    const double v = nu(y, method);
    return y * v * v;
  };
  return integrate(f, lo, hi, {1e-11, 1e-16, 20}).value;
}

} // namespace mixcpd
