// Scalar reference kernels. Every SIMD variant is tested for equivalence against these.

#include <algorithm>
#include <cmath>

#include "mixcpd/gspec.hpp"
#include "mixcpd/kernels.hpp"

namespace mixcpd::simd::scalar {

namespace {

template <typename Term>
double sum_terms(const double *head, const double *tail, std::size_t n, double scale, double offset, Term term) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sum += term(scale * (head[i] - tail[i]) + offset);
  return sum;
}

inline double half_square_pos(double v) {
  const double u = std::max(v, 0.0);
  return 0.5 * u * u;
}

} // namespace

double reduce_window(const TermParams &params, const double *head, const double *tail, std::size_t n, double scale,
                     double offset) {
  const double p0 = params.p0;
  const double log_p0 = params.log_p0;
  switch (params.transform) {
  case Transform::glr_mixture:
    return sum_terms(head, tail, n, scale, offset, [p0](double v) { return mixture_log(half_square_pos(v), p0); });
  case Transform::glr_hard:
    return sum_terms(head, tail, n, scale, offset,
                     [log_p0](double v) { return std::max(half_square_pos(v) + log_p0, 0.0); });
  case Transform::glr_square:
    return sum_terms(head, tail, n, scale, offset, [](double v) { return half_square_pos(v); });
  case Transform::glr_max: {
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      best = std::max(best, half_square_pos(scale * (head[i] - tail[i]) + offset));
    return best;
  }
  case Transform::fixed_mixture:
    return sum_terms(head, tail, n, scale, offset, [p0](double v) { return mixture_log(std::max(v, 0.0), p0); });
  case Transform::fixed_hard:
    return sum_terms(head, tail, n, scale, offset, [log_p0](double v) { return std::max(v + log_p0, 0.0); });
  case Transform::linear:
    return sum_terms(head, tail, n, scale, offset, [](double v) { return v; });
  }
  return 0.0;
}

void exp_block(const double *x, double *out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::exp(x[i]);
}

void log_block(const double *x, double *out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::log(x[i]);
}

} // namespace mixcpd::simd::scalar
