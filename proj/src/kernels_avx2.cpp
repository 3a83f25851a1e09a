// AVX2 + FMA kernels. Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "mixcpd/gspec.hpp"
#include "mixcpd/kernels.hpp"

namespace mixcpd::simd::avx2 {

namespace {

// Cephes exp: range reduction by ln 2 in two parts, then a (3,4) Pade form.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.78);
  const __m256d lo = _mm256_set1_pd(-745.13);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d fx = _mm256_floor_pd(_mm256_fmadd_pd(x, _mm256_set1_pd(1.4426950408889634073599), _mm256_set1_pd(0.5)));
  x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(6.93145751953125E-1), x);
  x = _mm256_fnmadd_pd(fx, _mm256_set1_pd(1.42860682030941723212E-6), x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d p = _mm256_fmadd_pd(_mm256_set1_pd(1.26177193074810590878E-4), xx, _mm256_set1_pd(3.02994407707441961300E-2));
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(9.99999999999999999910E-1));
  p = _mm256_mul_pd(p, x);
  __m256d q = _mm256_fmadd_pd(_mm256_set1_pd(3.00198505138664455042E-6), xx, _mm256_set1_pd(2.52448340349684104192E-3));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.27265548208155028766E-1));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.00000000000000000009E0));
  __m256d r = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  r = _mm256_fmadd_pd(r, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));

  // Scale by 2^n in two halves so results down to the subnormal range stay finite.
  const __m128i n = _mm256_cvtpd_epi32(fx);
  const __m128i n1 = _mm_srai_epi32(n, 1);
  const __m128i n2 = _mm_sub_epi32(n, n1);
  const __m256i bias = _mm256_set1_epi64x(1023);
  const __m256d s1 = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(_mm256_cvtepi32_epi64(n1), bias), 52));
  const __m256d s2 = _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_add_epi64(_mm256_cvtepi32_epi64(n2), bias), 52));
  return _mm256_mul_pd(_mm256_mul_pd(r, s1), s2);
}

// Cephes log for positive normal inputs: mantissa in [sqrt(1/2), sqrt(2)), (5,5) rational kernel.
inline __m256d log_pd(__m256d y) {
  const __m256i bits = _mm256_castpd_si256(y);
  const __m256i exp_field = _mm256_srli_epi64(bits, 52);
  const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
  const __m256i half_exp = _mm256_set1_epi64x(0x3FE0000000000000LL);
  __m256d m = _mm256_castsi256_pd(_mm256_or_si256(_mm256_and_si256(bits, mant_mask), half_exp));

  // exponent as double: exp_field - 1022, via the magic-number trick (exp_field < 2^11)
  const __m256d magic = _mm256_set1_pd(4503599627370496.0); // 2^52
  __m256d e = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(exp_field, _mm256_castpd_si256(magic))), magic);
  e = _mm256_sub_pd(e, _mm256_set1_pd(1022.0));

  const __m256d small = _mm256_cmp_pd(m, _mm256_set1_pd(0.70710678118654752440), _CMP_LT_OQ);
  e = _mm256_sub_pd(e, _mm256_and_pd(small, _mm256_set1_pd(1.0)));
  m = _mm256_add_pd(m, _mm256_and_pd(small, m));
  const __m256d x = _mm256_sub_pd(m, _mm256_set1_pd(1.0));

  __m256d p = _mm256_fmadd_pd(_mm256_set1_pd(1.01875663804580931796E-4), x, _mm256_set1_pd(4.97494994976747001425E-1));
  p = _mm256_fmadd_pd(p, x, _mm256_set1_pd(4.70579119878881725854E0));
  p = _mm256_fmadd_pd(p, x, _mm256_set1_pd(1.44989225341610930846E1));
  p = _mm256_fmadd_pd(p, x, _mm256_set1_pd(1.79368678507819816313E1));
  p = _mm256_fmadd_pd(p, x, _mm256_set1_pd(7.70838733755885391666E0));
  __m256d q = _mm256_add_pd(x, _mm256_set1_pd(1.12873587189167450590E1));
  q = _mm256_fmadd_pd(q, x, _mm256_set1_pd(4.52279145837532221105E1));
  q = _mm256_fmadd_pd(q, x, _mm256_set1_pd(8.29875266912776603211E1));
  q = _mm256_fmadd_pd(q, x, _mm256_set1_pd(7.11544750618563894466E1));
  q = _mm256_fmadd_pd(q, x, _mm256_set1_pd(2.31251620126765340583E1));

  const __m256d z = _mm256_mul_pd(x, x);
  __m256d r = _mm256_mul_pd(_mm256_mul_pd(x, z), _mm256_div_pd(p, q));
  r = _mm256_fnmadd_pd(e, _mm256_set1_pd(2.121944400546905827679e-4), r);
  r = _mm256_fnmadd_pd(z, _mm256_set1_pd(0.5), r);
  r = _mm256_add_pd(r, x);
  return _mm256_fmadd_pd(e, _mm256_set1_pd(0.693359375), r);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(s, _mm_unpackhi_pd(s, s)));
}

inline __m256d half_square_pos(__m256d v) {
  const __m256d u = _mm256_max_pd(v, _mm256_setzero_pd());
  return _mm256_mul_pd(_mm256_set1_pd(0.5), _mm256_mul_pd(u, u));
}

// x + log(p0 + (1-p0) e^{-x}) where x > 0, else 0.
inline __m256d mixture_log_pd(__m256d x, __m256d p0, __m256d q0) {
  const __m256d inner = _mm256_fmadd_pd(q0, exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), x)), p0);
  const __m256d val = _mm256_add_pd(x, log_pd(inner));
  return _mm256_and_pd(_mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_GT_OQ), val);
}

template <typename VecTerm, typename ScalarTerm>
double sum_terms(const double *head, const double *tail, std::size_t n, double scale, double offset, VecTerm vterm,
                 ScalarTerm sterm) {
  const __m256d vs = _mm256_set1_pd(scale);
  const __m256d vo = _mm256_set1_pd(offset);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(head + i), _mm256_loadu_pd(tail + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(head + i + 4), _mm256_loadu_pd(tail + i + 4));
    acc0 = _mm256_add_pd(acc0, vterm(_mm256_fmadd_pd(vs, d0, vo)));
    acc1 = _mm256_add_pd(acc1, vterm(_mm256_fmadd_pd(vs, d1, vo)));
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(head + i), _mm256_loadu_pd(tail + i));
    acc0 = _mm256_add_pd(acc0, vterm(_mm256_fmadd_pd(vs, d0, vo)));
  }
  double sum = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i)
    sum += sterm(scale * (head[i] - tail[i]) + offset);
  return sum;
}

} // namespace

double reduce_window(const TermParams &params, const double *head, const double *tail, std::size_t n, double scale,
                     double offset) {
  const double p0s = params.p0;
  const double log_p0s = params.log_p0;
  const __m256d p0 = _mm256_set1_pd(params.p0);
  const __m256d q0 = _mm256_set1_pd(1.0 - params.p0);
  const __m256d log_p0 = _mm256_set1_pd(params.log_p0);
  const __m256d zero = _mm256_setzero_pd();

  switch (params.transform) {
  case Transform::glr_mixture:
    return sum_terms(
        head, tail, n, scale, offset, [&](__m256d v) { return mixture_log_pd(half_square_pos(v), p0, q0); },
        [&](double v) {
          const double u = std::max(v, 0.0);
          return mixture_log(0.5 * u * u, p0s);
        });
  case Transform::glr_hard:
    return sum_terms(
        head, tail, n, scale, offset, [&](__m256d v) { return _mm256_max_pd(_mm256_add_pd(half_square_pos(v), log_p0), zero); },
        [&](double v) {
          const double u = std::max(v, 0.0);
          return std::max(0.5 * u * u + log_p0s, 0.0);
        });
  case Transform::glr_square:
    return sum_terms(
        head, tail, n, scale, offset, [](__m256d v) { return half_square_pos(v); },
        [](double v) {
          const double u = std::max(v, 0.0);
          return 0.5 * u * u;
        });
  case Transform::glr_max: {
    const __m256d vs = _mm256_set1_pd(scale);
    const __m256d vo = _mm256_set1_pd(offset);
    __m256d best = zero;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
      const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(head + i), _mm256_loadu_pd(tail + i));
      best = _mm256_max_pd(best, half_square_pos(_mm256_fmadd_pd(vs, d, vo)));
    }
    double out = hmax(best);
    for (; i < n; ++i) {
      const double u = std::max(scale * (head[i] - tail[i]) + offset, 0.0);
      out = std::max(out, 0.5 * u * u);
    }
    return out;
  }
  case Transform::fixed_mixture:
    return sum_terms(
        head, tail, n, scale, offset, [&](__m256d v) { return mixture_log_pd(_mm256_max_pd(v, zero), p0, q0); },
        [&](double v) { return mixture_log(std::max(v, 0.0), p0s); });
  case Transform::fixed_hard:
    return sum_terms(
        head, tail, n, scale, offset, [&](__m256d v) { return _mm256_max_pd(_mm256_add_pd(v, log_p0), zero); },
        [&](double v) { return std::max(v + log_p0s, 0.0); });
  case Transform::linear:
    return sum_terms(
        head, tail, n, scale, offset, [](__m256d v) { return v; }, [](double v) { return v; });
  }
  return 0.0;
}

void exp_block(const double *x, double *out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(x + i)));
  if (i < n) {
    alignas(32) double buf[4] = {0.0, 0.0, 0.0, 0.0};
    std::copy(x + i, x + n, buf);
    _mm256_store_pd(buf, exp_pd(_mm256_load_pd(buf)));
    std::copy(buf, buf + (n - i), out + i);
  }
}

void log_block(const double *x, double *out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, log_pd(_mm256_loadu_pd(x + i)));
  if (i < n) {
    alignas(32) double buf[4] = {1.0, 1.0, 1.0, 1.0};
    std::copy(x + i, x + n, buf);
    _mm256_store_pd(buf, log_pd(_mm256_load_pd(buf)));
    std::copy(buf, buf + (n - i), out + i);
  }
}

} // namespace mixcpd::simd::avx2
