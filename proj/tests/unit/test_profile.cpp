#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mixcpd/detector.hpp"
#include "mixcpd/errors.hpp"
#include "mixcpd/profile.hpp"
#include "support.hpp"

using namespace mixcpd;

namespace {

double dot(const std::vector<double> &a, const std::vector<double> &b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

StreamState constant_state(const std::vector<double> &row, int steps, std::size_t capacity) {
  StreamState s(row.size(), capacity);
  for (int i = 0; i < steps; ++i)
    s.push(row);
  return s;
}

std::size_t index_of(const ProfileModel &m, Point z) {
  const auto c = m.candidates();
  for (std::size_t i = 0; i < c.size(); ++i)
    if (std::abs(c[i].x - z.x) < 1e-12 && std::abs(c[i].y - z.y) < 1e-12)
      return i;
  return c.size();
}

} // namespace

TEST_CASE("grid geometry") {
  const SensorGrid g(25, 25, 1.0);
  CHECK(g.size() == 625);
  CHECK(g.position(0).x == -12.0);
  CHECK(g.position(0).y == -12.0);
  CHECK(g.position(312).x == 0.0);
  CHECK(g.position(312).y == 0.0);
  CHECK(g.bounding_area() == 576.0);
  CHECK(ProfileModel::for_grid(g).area() == 576.0);
  CHECK(ProfileModel::for_grid(g).candidates().size() == 49 * 49);
}

TEST_CASE("amplitude field") {
  const SensorGrid g(25, 25, 1.0);
  const Source none{0.0, {0.0, 0.0}};
  for (double m : amplitude_field(std::span(&none, 1), g, 1.0))
    CHECK(m == 0.0);
  const Source one{1.0, {2.0, -3.0}};
  const auto mu = amplitude_field(std::span(&one, 1), g, 1.0);
  CHECK(dot(mu, mu) == doctest::Approx(1.0).epsilon(1e-12));
  const Source bad{-1.0, {0.0, 0.0}};
  CHECK_THROWS_AS(amplitude_field(std::span(&bad, 1), g, 1.0), ParameterError);
}

TEST_CASE("sensors above a tenth of the peak amplitude") {
  // exp(-d^2 / 4) >= 0.1 inside the disc d^2 <= 4 ln 10
  const SensorGrid g(25, 25, 1.0);
  const Source src{1.0, {0.0, 0.0}};
  const auto mu = amplitude_field(std::span(&src, 1), g, 1.0);
  const double peak = *std::max_element(mu.begin(), mu.end());
  std::size_t above = 0;
  for (double m : mu)
    above += m >= 0.1 * peak ? 1 : 0;
  std::size_t lattice = 0;
  for (int i = -12; i <= 12; ++i)
    for (int j = -12; j <= 12; ++j)
      lattice += i * i + j * j <= 4.0 * std::log(10.0) ? 1 : 0;
  CHECK(above == lattice);
  CHECK(above == 29);
}

TEST_CASE("candidate profiles have unit norm") {
  const SensorGrid g(25, 25, 1.0);
  const auto model = ProfileModel::for_grid(g, {0.5, 1.0, 3.0});
  for (double beta : model.betas)
    for (const auto &z : model.candidates()) {
      const auto v = profile_vector(g, z, beta);
      CHECK(std::abs(dot(v, v) - 1.0) < 1e-12);
    }
  // the unnormalized profile has unit norm in the continuum limit
  CHECK(raw_profile_norm(g, {0.0, 0.0}, 1.0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(raw_profile_norm(g, {0.5, 0.25}, 2.0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("zero data scores zero everywhere") {
  const SensorGrid g(6, 7, 1.0);
  const auto model = ProfileModel::for_grid(g);
  const auto s = constant_state(std::vector<double>(g.size(), 0.0), 5, 10);
  CHECK(profile_score(s, 0, model, g).score == 0.0);
}

TEST_CASE("planted profile is recovered at its location") {
  const SensorGrid g(15, 15, 1.0);
  const auto model = ProfileModel::for_grid(g);
  const Point z{1.0, -0.5};
  const double r = 0.8;
  auto row = profile_vector(g, z, 1.0);
  for (double &x : row)
    x *= r;
  const auto s = constant_state(row, 12, 20);
  for (std::int64_t k : {0, 4, 11}) {
    const double w = static_cast<double>(12 - k);
    const auto best = profile_score(s, k, model, g);
    CHECK(best.score == doctest::Approx(0.5 * r * r * w).epsilon(1e-12));
    CHECK(best.z == index_of(model, z));
  }
}

TEST_CASE("score is invariant when sensors and source move together") {
  const SensorGrid g(21, 21, 1.0);
  const auto model = ProfileModel::for_grid(g);
  const auto rows = testing::gaussian_rows(91, 8, g.size());
  // the same local field around two sources one sensor apart
  auto a = rows, b = rows;
  const auto pa = profile_vector(g, {0.0, 0.0}, 1.0);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t n = 0; n < g.size(); ++n)
      a[t][n] = 2.0 * pa[n] + 0.3 * rows[t][n];
    for (std::size_t n = 0; n < g.size(); ++n)
      b[t][n] = n % 21 > 0 ? a[t][n - 1] : 0.0;
  }
  const auto sa = testing::filled_state(a, 10);
  const auto sb = testing::filled_state(b, 10);
  const auto ra = profile_score(sa, 0, model, g);
  const auto rb = profile_score(sb, 0, model, g);
  CHECK(rb.score == doctest::Approx(ra.score).epsilon(1e-9));
  CHECK(model.candidates()[rb.z].x == doctest::Approx(model.candidates()[ra.z].x + 1.0));
}

TEST_CASE("single candidate equals the independent projection") {
  const SensorGrid g(5, 6, 1.0);
  ProfileModel model;
  model.betas = {1.5};
  model.candidate_spacing = 1.0;
  model.x_min = model.x_max = 0.3;
  model.y_min = model.y_max = -0.7;
  const auto rows = testing::gaussian_rows(92, 9, g.size());
  const auto s = testing::filled_state(rows, 20);
  std::vector<double> alpha(g.size());
  double ss = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const Point x = g.position(n);
    alpha[n] = std::exp(-((x.x - 0.3) * (x.x - 0.3) + (x.y + 0.7) * (x.y + 0.7)) / 6.0);
    ss += alpha[n] * alpha[n];
  }
  for (std::int64_t k = 0; k < 9; ++k) {
    double proj = 0.0;
    for (std::size_t n = 0; n < g.size(); ++n)
      proj += alpha[n] / std::sqrt(ss) * u_stat(s, k, n);
    const double p = std::max(proj, 0.0);
    CHECK(profile_score(s, k, model, g).score == doctest::Approx(0.5 * p * p).epsilon(1e-12).scale(1e-14));
  }
}

TEST_CASE("separable bank matches the dense projection") {
  const SensorGrid g(9, 11, 1.0);
  for (double beta : {0.7, 2.0}) {
    const auto model = ProfileModel::for_grid(g, {beta});
    const ProfileBank bank(g, model, beta);
    const auto cands = model.candidates();
    REQUIRE(bank.n_candidates() == cands.size());
    const auto field = testing::gaussian_rows(93, 1, g.size()).front();
    std::vector<double> out(cands.size());
    bank.project(field.data(), out.data());
    for (std::size_t i = 0; i < cands.size(); ++i)
      CHECK(out[i] == doctest::Approx(dot(profile_vector(g, cands[i], beta), field)).epsilon(1e-12).scale(1e-12));
  }
}

TEST_CASE("profile detector statistic is twice the best window score") {
  const SensorGrid g(4, 5, 1.0);
  DetectorConfig cfg = testing::config(Rule::profile, 0.1, 1e300, 6);
  cfg.profile = ProfileSettings{4, 5, 1.0, {1.0, 2.0}, 0.0};
  const auto model = ProfileModel::for_grid(g, {1.0, 2.0});
  auto det = make_detector(cfg, g.size());
  std::vector<double> means(g.size(), 0.0);
  means[7] = 0.9;
  const auto rows = testing::gaussian_rows(94, 25, g.size(), means);
  StreamState s(g.size(), 6);
  for (const auto &row : rows) {
    const auto d = det->step(row);
    s.push(row);
    double best = -1.0;
    std::int64_t best_k = -1;
    for (std::int64_t w = 1; w <= std::min<std::int64_t>(s.time(), 6); ++w) {
      const double v = profile_score(s, s.time() - w, model, g).score;
      if (v > best) {
        best = v;
        best_k = s.time() - w;
      }
    }
    CHECK(d.score == doctest::Approx(2.0 * best).epsilon(1e-11).scale(1e-12));
    if (best > 1e-9)
      CHECK(d.argmax_k == best_k);
  }
  CHECK_THROWS_AS(make_detector(cfg, 21), DimensionError);
}

TEST_CASE("profile ARL structure") {
  double last = 0.0;
  for (double b = 10.0; b <= 40.0; b += 1.0) {
    const double a = profile_arl(b, 1.0, 576.0, 1, 100);
    CHECK(a > last);
    last = a;
  }
  const double a1 = profile_arl(29.5, 1.0, 576.0, 1, 100);
  const double a2 = profile_arl(29.5, 1.0, 288.0, 1, 100);
  CHECK(a2 == doctest::Approx(2.0 * a1).epsilon(1e-13));
  CHECK(profile_tail_prob(29.5, 1.0, 576.0, 1, 100, 0.0) == 0.0);
  CHECK(profile_tail_prob(29.5, 1.0, 576.0, 1, 100, 250.0) == doctest::Approx(250.0 / a1).epsilon(1e-13));
  CHECK_THROWS(profile_arl(0.0, 1.0, 576.0, 1, 100));
}
