#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mixcpd/analytics.hpp"
#include "mixcpd/errors.hpp"
#include "mixcpd/gspec.hpp"

using namespace mixcpd;

namespace {

const std::vector<GSpec> kSpecs{GSpec::mixture(0.1), GSpec::mixture(0.03), GSpec::hard(0.3),
                                GSpec::square(),      GSpec::fixed_mixture(0.1, 1.0), GSpec::fixed_hard(0.1, 1.0)};

} // namespace

TEST_CASE("psi and gamma of the square score in closed form") {
  const NullScoreModel model(GSpec::square());
  for (double th : {0.01, 0.1, 0.3, 0.5, 0.7, 0.9}) {
    const double psi = std::log(0.5 + 0.5 / std::sqrt(1.0 - th));
    const auto m = model.moments(th);
    CHECK(std::abs(m.psi - psi) < 1e-10);
    const double gamma = 0.5 * th * th * 0.5 * std::pow(1.0 - th, -1.5) / std::exp(psi);
    CHECK(m.gamma == doctest::Approx(gamma).epsilon(1e-9));
    const double h = 1e-5;
    const double psi_dot = (std::log(0.5 + 0.5 / std::sqrt(1.0 - th - h)) - std::log(0.5 + 0.5 / std::sqrt(1.0 - th + h))) / (2 * h);
    CHECK(m.psi_dot == doctest::Approx(psi_dot).epsilon(1e-7));
  }
  CHECK_THROWS_AS(model.psi(1.0), DomainError);
}

TEST_CASE("psi is convex and psi_dot increasing for every score family") {
  for (const auto &g : kSpecs) {
    const NullScoreModel model(g, g.is_fixed_mean() ? 20 : 1);
    const double top = g.is_square_growth() ? 0.95 : 4.0;
    double last = -1.0;
    for (double th = 0.02; th < top; th += top / 40.0) {
      const auto m = model.moments(th);
      CHECK(m.psi_ddot > 0.0);
      CHECK(m.psi_dot > last);
      CHECK(m.gamma > 0.0);
      last = m.psi_dot;
    }
    CHECK(model.psi_dot(1e-6) == doctest::Approx(model.null_mean()).epsilon(1e-4));
  }
}

TEST_CASE("psi quadrature is stable when the tolerance is halved") {
  for (const auto &g : kSpecs) {
    const NullScoreModel a(g, 10, {1e-10, 1e-14, 20});
    const NullScoreModel b(g, 10, {5e-11, 1e-14, 20});
    const double th = g.is_square_growth() ? 0.6 : 1.5;
    CHECK(std::abs(a.psi(th) - b.psi(th)) < 1e-9 * std::max(1.0, std::abs(a.psi(th))));
    CHECK(std::abs(a.gamma(th) - b.gamma(th)) < 1e-9 * std::max(1.0, a.gamma(th)));
  }
}

TEST_CASE("solve_theta inverts psi_dot") {
  const NullScoreModel model(GSpec::mixture(0.1));
  for (double b : {12.0, 19.5, 30.0}) {
    const double th = solve_theta(model, b, 100);
    CHECK(model.psi_dot(th) == doctest::Approx(b / 100.0).epsilon(1e-10));
  }
  CHECK_THROWS_AS(solve_theta(model, 0.5 * model.null_mean() * 100, 100), CalibrationError);
}

TEST_CASE("large-deviation exponent increases with b") {
  const NullScoreModel model(GSpec::mixture(0.1));
  double last = 0.0;
  for (double b = 10.0; b <= 40.0; b += 2.0) {
    const double th = solve_theta(model, b, 100);
    const auto m = model.moments(th);
    const double rate = 100.0 * (th * m.psi_dot - m.psi);
    CHECK(rate > last);
    last = rate;
  }
}

TEST_CASE("ARL is increasing in b and decreasing in m1") {
  for (const auto &g : {GSpec::mixture(0.1), GSpec::hard(0.1), GSpec::mixture(0.3)}) {
    // from ARL about 500 upward, where the approximation applies
    const double b0 = calibrate_threshold(g, 100, 500.0, 1, 200);
    double last = 0.0;
    for (double b = b0; b <= b0 + 15.0; b += 2.5) {
      const double a = arl_theorem1(g, 100, b, 1, 200).arl;
      CHECK(a > last);
      last = a;
    }
    double prev = std::numeric_limits<double>::infinity();
    for (std::int64_t m1 : {20, 50, 100, 200, 400}) {
      const double a = arl_theorem1(g, 100, b0 + 5.0, 1, m1).arl;
      CHECK(a < prev);
      prev = a;
    }
  }
}

TEST_CASE("fixed-mean ARL is increasing in b") {
  const auto g = GSpec::fixed_hard(0.1, 1.0);
  const auto low = arl_fixed_mean(g, 100, 11.0, 1, 40);
  const auto high = arl_fixed_mean(g, 100, 13.0, 1, 40);
  CHECK(high.arl > low.arl);
  CHECK(low.windows.size() == 40);
  CHECK(arl(g, 100, 11.0, 1, 40).arl == low.arl);
}

TEST_CASE("calibration round trip") {
  for (const auto &g : {GSpec::mixture(0.1), GSpec::hard(0.3), GSpec::mixture(0.03)})
    for (double target : {1000.0, 10000.0}) {
      const double b = calibrate_threshold(g, 100, target, 1, 200);
      CHECK(arl_theorem1(g, 100, b, 1, 200).arl == doctest::Approx(target).epsilon(1e-6));
    }
  CHECK_THROWS(calibrate_threshold(GSpec::mixture(0.1), 100, 1.0, 1, 200));
}

TEST_CASE("tail probability from the exponential law") {
  const auto p = tail_prob_from_arl(5000.0, 500.0);
  CHECK(p.linear == doctest::Approx(0.1));
  CHECK(p.exponential == doctest::Approx(1.0 - std::exp(-0.1)));
  CHECK(tail_prob_from_arl(5000.0, 0.0).exponential == 0.0);
  CHECK(tail_prob_from_arl(100.0, 500.0).linear == 1.0);
}

TEST_CASE("rho limits and the walk minimum identity") {
  CHECK(rho(10.0) == doctest::Approx(26.0).epsilon(1e-6 / 26.0));
  for (double d : {0.3, 1.0, 2.0, 5.0})
    CHECK(walk_min_mean(d) == doctest::Approx(rho(d) - 1.0 - 0.25 * d * d));
  CHECK(walk_min_mean(1.0) < 0.0);
  CHECK_THROWS_AS(rho(0.0), DomainError);
}

TEST_CASE("rho and the walk minimum agree with simulation") {
  // ladder height moments of the walk with Normal(Delta^2/2, Delta^2) steps
  const double delta = 1.0;
  std::mt19937_64 gen(71);
  std::normal_distribution<double> step(0.5 * delta * delta, delta);
  const int n = 400000;
  double m1 = 0.0, m2 = 0.0, mins = 0.0, mins2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    do
      s += step(gen);
    while (s <= 0.0);
    m1 += s;
    m2 += s * s;
    double w = 0.0, lo = 0.0;
    for (int t = 0; t < 120; ++t) {
      w += step(gen);
      lo = std::min(lo, w);
    }
    mins += lo;
    mins2 += lo * lo;
  }
  CHECK(m2 / (2.0 * m1) == doctest::Approx(rho(delta)).epsilon(0.01));
  const double mean_min = mins / n;
  const double se = std::sqrt((mins2 / n - mean_min * mean_min) / n);
  CHECK(std::abs(mean_min - walk_min_mean(delta)) < 4.0 * se);
}

TEST_CASE("null score means") {
  CHECK(expected_g_null(GSpec::mixture(1.0)) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(expected_g_null(GSpec::hard(1.0)) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(expected_g_null(GSpec::square()) == doctest::Approx(0.25).epsilon(1e-12));

  std::mt19937_64 gen(72);
  std::normal_distribution<double> z;
  const auto g = GSpec::mixture(0.1);
  const int n = 10'000'000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = g.value(z(gen));
    s += v;
    s2 += v * v;
  }
  const double mean = s / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(expected_g_null(g) - mean) < 3.0 * se);

  // fixed-mean: l ~ Normal(-w/2, w) at delta = 1
  const auto f = GSpec::fixed_hard(0.5, 1.0);
  CHECK(expected_g_null(f, 4) == doctest::Approx(expected_g_normal(f, -2.0, 2.0)).epsilon(1e-9));
}

TEST_CASE("Theorem-2 EDD decreases with the signal") {
  const auto t2 = GSpec::mixture(0.1);
  double last = std::numeric_limits<double>::infinity();
  for (double mu = 0.6; mu <= 2.0; mu += 0.1) {
    const double e = edd_theorem2(t2, 100, 19.5, Scenario::leading(100, 5, mu), 200).value;
    CHECK(e < last);
    last = e;
  }
  CHECK(edd_theorem2(t2, 100, 19.5, Scenario::leading(100, 1, 0.3), 50).window_warning);
  CHECK_THROWS(edd_theorem2(t2, 100, 19.5, Scenario::null(100), 200));
}

TEST_CASE("crude EDD") {
  const auto t2 = GSpec::mixture(0.1);
  CHECK(edd_crude(t2, 100, 0.0, Scenario::leading(100, 10, 1.0), 3, 200).value == doctest::Approx(3.0));
  const auto sc = Scenario::leading(100, 3, 1.0);
  const double crude = edd_crude(t2, 100, 19.5, sc, 1, 200).value;
  const double thm2 = edd_theorem2(t2, 100, 19.5, sc, 200).value;
  CHECK(std::abs(crude - thm2) <= 0.3 * thm2);
  CHECK(edd_crude(t2, 100, 1e4, Scenario::leading(100, 1, 0.1), 1, 50).saturated);
}
