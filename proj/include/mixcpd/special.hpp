#pragma once

namespace mixcpd {

double normal_pdf(double x) noexcept;
double normal_cdf(double x) noexcept;
/// E[X-] = E[max(-X, 0)] for X ~ Normal(mean, sd^2), sd > 0.
double expected_negative_part(double mean, double sd) noexcept;
/// E[X+] for X ~ Normal(mean, sd^2), sd > 0.
double expected_positive_part(double mean, double sd) noexcept;

enum class NuMethod { approximation, series };

/// Overshoot correction nu(x) by the closed-form approximation
/// (2/x)(Phi(x/2) - 1/2) / ((x/2) Phi(x/2) + phi(x/2)). Throws DomainError for x <= 0.
double nu(double x);

/// nu(x) = 2 x^-2 exp(-2 sum_{n>=1} Phi(-x sqrt(n) / 2) / n), summed directly for large x
/// and with an Euler-Maclaurin tail for small x.
double nu_series(double x);

double nu(double x, NuMethod method);

/// Integral of y nu(y)^2 over [lo, hi], 0 < lo <= hi.
double nu_integral(double lo, double hi, NuMethod method = NuMethod::approximation);

} // namespace mixcpd
