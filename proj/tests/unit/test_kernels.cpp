#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "mixcpd/detector.hpp"
#include "mixcpd/errors.hpp"
#include "mixcpd/gspec.hpp"
#include "mixcpd/kernels.hpp"
#include "support.hpp"

using namespace mixcpd;
using namespace mixcpd::simd;

namespace {

std::int64_t ulp_distance(double a, double b) {
  auto key = [](double x) {
    const auto bits = std::bit_cast<std::int64_t>(x);
    return bits < 0 ? std::numeric_limits<std::int64_t>::min() - bits : bits;
  };
  const std::int64_t d = key(a) - key(b);
  return d < 0 ? -d : d;
}

const std::vector<Transform> kTransforms{Transform::glr_mixture, Transform::glr_hard,      Transform::glr_square,
                                         Transform::glr_max,     Transform::fixed_mixture, Transform::fixed_hard,
                                         Transform::linear};

/// Direct per-element term in long double, independent of both kernel sets.
long double oracle_term(Transform t, double p0, long double v) {
  const long double pos = std::max(v, 0.0L);
  const long double x = 0.5L * pos * pos;
  switch (t) {
  case Transform::glr_mixture:
    return std::log(1.0L - p0 + p0 * std::exp(x));
  case Transform::glr_hard:
    return std::max(x + std::log(static_cast<long double>(p0)), 0.0L);
  case Transform::glr_square:
  case Transform::glr_max:
    return x;
  case Transform::fixed_mixture:
    return std::log(1.0L - p0 + p0 * std::exp(pos));
  case Transform::fixed_hard:
    return std::max(v + std::log(static_cast<long double>(p0)), 0.0L);
  case Transform::linear:
    return v;
  }
  return 0.0L;
}

} // namespace

TEST_CASE("scalar reduce_window agrees with a long double oracle") {
  std::mt19937_64 gen(31);
  std::normal_distribution<double> z(0.0, 3.0);
  for (Transform t : kTransforms) {
    const auto params = TermParams::make(t, 0.1);
    std::vector<double> head(257), tail(257);
    for (std::size_t i = 0; i < head.size(); ++i) {
      head[i] = z(gen);
      tail[i] = z(gen);
    }
    const double scale = 0.6, offset = -0.2;
    long double want = 0.0L;
    for (std::size_t i = 0; i < head.size(); ++i) {
      const long double v = static_cast<long double>(scale) * (head[i] - tail[i]) + offset;
      const long double term = oracle_term(t, 0.1, v);
      want = t == Transform::glr_max ? std::max(want, term) : want + term;
    }
    const double got = scalar::reduce_window(params, head.data(), tail.data(), head.size(), scale, offset);
    CHECK(got == doctest::Approx(static_cast<double>(want)).epsilon(1e-12));
    CHECK(scalar::reduce_window(params, head.data(), tail.data(), 0, scale, offset) == 0.0);
  }
}

TEST_CASE("isa names and selection") {
  CHECK(parse_isa("scalar") == Isa::scalar);
  CHECK(parse_isa(to_string(Isa::avx2)) == Isa::avx2);
  CHECK_THROWS_AS(parse_isa("neon"), ParameterError);
  const Isa before = active_isa();
  set_active_isa(Isa::scalar);
  CHECK(active_isa() == Isa::scalar);
  CHECK(kernels().isa == Isa::scalar);
  set_active_isa(before);
}

#if defined(MIXCPD_HAVE_AVX2)

TEST_CASE("avx2 exp and log stay within 4 ulps of libm") {
  if (!isa_supported(Isa::avx2)) {
    MESSAGE("AVX2 not available on this CPU; skipped");
    return;
  }
  std::mt19937_64 gen(32);
  std::uniform_real_distribution<double> ex(-745.0, 709.0);
  std::uniform_real_distribution<double> lx(-300.0, 300.0);
  const std::size_t n = 100003;
  std::vector<double> x(n), out(n), lin(n), lout(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = i % 3 == 0 ? ex(gen) : ex(gen) / 100.0;
    lin[i] = std::pow(10.0, lx(gen));
  }
  avx2::exp_block(x.data(), out.data(), n);
  avx2::log_block(lin.data(), lout.data(), n);
  std::int64_t worst_exp = 0, worst_log = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::exp(x[i]);
    if (e >= std::numeric_limits<double>::min())
      worst_exp = std::max(worst_exp, ulp_distance(out[i], e));
    worst_log = std::max(worst_log, ulp_distance(lout[i], std::log(lin[i])));
  }
  CHECK(worst_exp <= 4);
  CHECK(worst_log <= 4);

  const std::vector<double> special{0.0, 1.0, -1.0, 709.0, -745.0, -800.0};
  std::vector<double> sout(special.size());
  avx2::exp_block(special.data(), sout.data(), special.size());
  CHECK(sout[0] == 1.0);
  CHECK(sout[5] >= 0.0);
  CHECK(sout[5] < 1e-300);
  const std::vector<double> one{1.0};
  double lone = -1.0;
  avx2::log_block(one.data(), &lone, 1);
  CHECK(lone == 0.0);
}

TEST_CASE("avx2 reduce_window matches scalar for every transform and tail length") {
  if (!isa_supported(Isa::avx2)) {
    MESSAGE("AVX2 not available on this CPU; skipped");
    return;
  }
  std::mt19937_64 gen(33);
  std::normal_distribution<double> z(0.0, 4.0);
  std::uniform_real_distribution<double> sc(0.05, 2.0), off(-3.0, 1.0), pp(0.01, 1.0);
  for (Transform t : kTransforms)
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 16u, 100u, 625u}) {
      for (int rep = 0; rep < 5; ++rep) {
        std::vector<double> head(n), tail(n);
        for (std::size_t i = 0; i < n; ++i) {
          head[i] = z(gen);
          tail[i] = z(gen);
        }
        const auto params = TermParams::make(t, pp(gen));
        const double scale = sc(gen), offset = off(gen);
        const double a = scalar::reduce_window(params, head.data(), tail.data(), n, scale, offset);
        const double b = avx2::reduce_window(params, head.data(), tail.data(), n, scale, offset);
        if (t == Transform::linear) {
          double mag = 0.0;
          for (std::size_t i = 0; i < n; ++i)
            mag += std::abs(scale * (head[i] - tail[i]) + offset);
          CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, mag));
        } else {
          CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
        }
      }
    }
}

TEST_CASE("detectors make identical decisions under either isa") {
  if (!isa_supported(Isa::avx2)) {
    MESSAGE("AVX2 not available on this CPU; skipped");
    return;
  }
  const std::vector<double> means(30, 0.4);
  const auto rows = testing::gaussian_rows(34, 300, 30, means);
  const Isa before = active_isa();
  for (Rule rule : {Rule::t1, Rule::t2, Rule::t3, Rule::t4, Rule::tmax, Rule::tv}) {
    const auto cfg = testing::config(rule, 0.1, 1e300, 60);
    set_active_isa(Isa::scalar);
    auto ds = make_detector(cfg, 30);
    set_active_isa(Isa::avx2);
    auto dv = make_detector(cfg, 30);
    for (const auto &row : rows) {
      set_active_isa(Isa::scalar);
      const auto a = ds->step(row);
      set_active_isa(Isa::avx2);
      const auto b = dv->step(row);
      CHECK(std::abs(a.score - b.score) <= 1e-12 * std::max(1.0, std::abs(a.score)));
    }
  }
  set_active_isa(before);
}

#endif
