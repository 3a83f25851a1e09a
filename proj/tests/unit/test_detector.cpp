#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "mixcpd/detector.hpp"
#include "mixcpd/errors.hpp"
#include "mixcpd/gspec.hpp"
#include "mixcpd/stream_state.hpp"
#include "support.hpp"

using namespace mixcpd;
using testing::config;
using testing::gaussian_rows;

namespace {

const std::vector<Rule> kWindowRules{Rule::t1, Rule::t2, Rule::t3, Rule::t4, Rule::tmax, Rule::tv};

DetectorConfig parallel_config(double b1, double b2, std::int64_t m1 = 50) {
  DetectorConfig d = config(Rule::parallel, 0.1, 0.0, m1);
  d.components = {{Rule::t2, 0.02, 1.0, b1}, {Rule::t2, 0.33, 1.0, b2}};
  return d;
}

DetectorConfig profile_config(double b) {
  DetectorConfig d = config(Rule::profile, 0.1, b, 20);
  d.profile = ProfileSettings{4, 5, 1.0, {1.0}, 0.0};
  return d;
}

struct Brute {
  double score;
  std::int64_t k;
};

/// max over windows of the score family applied per stream, straight from glr_stat / loglik_fixed.
Brute brute_window(const StreamState &s, Rule rule, double p0, double delta, std::int64_t m0, std::int64_t m1) {
  Brute best{-std::numeric_limits<double>::infinity(), -1};
  const std::int64_t t = s.time();
  for (std::int64_t w = m0; w <= std::min(t, m1); ++w) {
    const std::int64_t k = t - w;
    std::vector<double> u(s.n_streams()), ell(s.n_streams());
    for (std::size_t n = 0; n < s.n_streams(); ++n) {
      u[n] = u_stat(s, k, n);
      ell[n] = loglik_fixed(s, k, n, delta);
    }
    double v = 0.0;
    switch (rule) {
    case Rule::t1:
      v = score_fixed(ell, p0, FixedVariant::mixture);
      break;
    case Rule::t2:
      v = score_mixture_glr(u, p0);
      break;
    case Rule::t3:
      v = score_fixed(ell, p0, FixedVariant::hard);
      break;
    case Rule::t4:
      v = score_hard_glr(u, p0);
      break;
    case Rule::tmax:
      v = 0.0;
      for (std::size_t n = 0; n < u.size(); ++n)
        v = std::max(v, glr_stat(s, k, n));
      break;
    case Rule::tv:
      v = std::accumulate(ell.begin(), ell.end(), 0.0);
      break;
    default:
      break;
    }
    if (v > best.score)
      best = {v, k};
  }
  return best;
}

} // namespace

TEST_CASE("rule names parse in either case") {
  CHECK(parse_rule("T2") == Rule::t2);
  CHECK(parse_rule("tmax") == Rule::tmax);
  CHECK(parse_rule("Tmax") == Rule::tmax);
  CHECK(parse_rule("Mei") == Rule::mei);
  CHECK(parse_rule(to_string(Rule::parallel)) == Rule::parallel);
  CHECK_THROWS_AS(parse_rule("T9"), ParameterError);
}

TEST_CASE("configuration errors") {
  CHECK_THROWS(make_detector(config(Rule::t2, 0.1, 1.0, 5, 1.0, 10), 3));
  CHECK_THROWS_AS(make_detector(config(Rule::t2, 0.0, 1.0), 3), ParameterError);
  CHECK_THROWS_AS(make_detector(config(Rule::t2, 0.1, std::nan("")), 3), ParameterError);
  CHECK_THROWS_AS(make_detector(config(Rule::parallel, 0.1, 1.0), 3), ParameterError);
  CHECK_THROWS_AS(make_detector(config(Rule::t2, 0.1, 1.0), 0), ParameterError);
  auto det = make_detector(config(Rule::t2, 0.1, 1.0), 3);
  const std::vector<double> y{1.0};
  CHECK_THROWS_AS(det->step(y), DimensionError);
}

TEST_CASE("b = 0 stops at the first full window for every rule") {
  const auto rows = gaussian_rows(41, 30, 20);
  // TV is excluded: its score has no positive part and can start below 0
  for (Rule rule : {Rule::t1, Rule::t2, Rule::t3, Rule::t4, Rule::tmax})
    CHECK(testing::stop_time(config(rule, 0.1, 0.0), rows) == 1);
  CHECK(testing::stop_time(config(Rule::t2, 0.1, 0.0, 50, 1.0, 4), rows) == 4);
  CHECK(testing::stop_time(config(Rule::mei, 0.1, 0.0), rows) == 1);
  CHECK(testing::stop_time(parallel_config(0.0, 50.0), rows) == 1);
  CHECK(testing::stop_time(profile_config(0.0), gaussian_rows(41, 30, 20)) == 1);
}

TEST_CASE("no decision before m0 observations") {
  auto det = make_detector(config(Rule::t2, 0.1, 0.0, 50, 1.0, 3), 2);
  const std::vector<double> y{5.0, 5.0};
  auto d = det->step(y);
  CHECK_FALSE(d.stopped);
  CHECK(d.argmax_k == -1);
  CHECK(std::isinf(d.score));
  det->step(y);
  d = det->step(y);
  CHECK(d.stopped);
  CHECK(d.argmax_k == 0);
}

TEST_CASE("window scores match the brute-force composition of per-stream statistics") {
  const std::vector<double> means{0.0, 0.8, 0.0, 0.3, 0.0, 1.1, 0.0};
  const auto rows = gaussian_rows(42, 160, means.size(), means);
  const std::int64_t m0 = 2, m1 = 40;
  for (Rule rule : kWindowRules) {
    const double p0 = 0.2, delta = 0.9;
    auto det = make_detector(config(rule, p0, std::numeric_limits<double>::infinity(), m1, delta, m0), means.size());
    StreamState s(means.size(), static_cast<std::size_t>(m1));
    for (const auto &row : rows) {
      const auto d = det->step(row);
      s.push(row);
      if (s.time() < m0)
        continue;
      const auto want = brute_window(s, rule, p0, delta, m0, m1);
      CHECK(d.score == doctest::Approx(want.score).epsilon(1e-11).scale(1.0));
      CHECK(d.argmax_k == want.k);
    }
  }
}

TEST_CASE("ties in k go to the most recent candidate") {
  auto det = make_detector(config(Rule::t2, 0.1, 1.0, 30), 4);
  const std::vector<double> zero(4, 0.0);
  Decision d;
  for (int i = 0; i < 10; ++i)
    d = det->step(zero);
  CHECK(d.score == 0.0);
  CHECK(d.argmax_k == 9);
}

TEST_CASE("stopping time is nondecreasing in b for every rule") {
  const std::vector<double> means(25, 0.15);
  const auto rows = gaussian_rows(43, 400, 25, means);
  std::vector<Rule> rules = kWindowRules;
  rules.push_back(Rule::mei);
  for (Rule rule : rules) {
    std::int64_t last = 0;
    for (double b = 0.0; b <= 60.0; b += 2.5) {
      std::int64_t t = testing::stop_time(config(rule, 0.1, b), rows);
      if (t == 0)
        t = std::numeric_limits<std::int64_t>::max();
      CHECK(t >= last);
      last = t;
    }
  }
  std::int64_t last = 0;
  for (double b = 0.0; b <= 40.0; b += 2.0) {
    std::int64_t t = testing::stop_time(parallel_config(b, 2.0 * b), rows);
    if (t == 0)
      t = std::numeric_limits<std::int64_t>::max();
    CHECK(t >= last);
    last = t;
  }
}

TEST_CASE("permuting streams leaves scores and stops unchanged") {
  const std::size_t n = 20;
  std::vector<double> means(n, 0.0);
  means[3] = means[11] = 0.9;
  const auto rows = gaussian_rows(44, 200, n, means);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(45));
  auto permuted = rows;
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t i = 0; i < n; ++i)
      permuted[t][i] = rows[t][perm[i]];

  std::vector<DetectorConfig> configs;
  for (Rule rule : kWindowRules)
    configs.push_back(config(rule, 0.1, 1e300));
  configs.push_back(config(Rule::mei, 0.1, 1e300));
  configs.push_back(parallel_config(1e300, 1e300));
  for (const auto &cfg : configs) {
    auto a = make_detector(cfg, n);
    auto b = make_detector(cfg, n);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const auto da = a->step(rows[t]);
      const auto db = b->step(permuted[t]);
      CHECK(db.score == doctest::Approx(da.score).epsilon(1e-10));
    }
  }
  for (Rule rule : kWindowRules)
    CHECK(testing::stop_time(config(rule, 0.1, 15.0), rows) == testing::stop_time(config(rule, 0.1, 15.0), permuted));
}

TEST_CASE("Mei recursion equals the per-stream maximum over all change points") {
  const std::vector<double> means{0.0, 0.5, 1.0, -0.3};
  const auto rows = gaussian_rows(46, 150, means.size(), means);
  const double delta = 0.8;
  auto det = make_detector(config(Rule::mei, 0.1, 1e300, 50, delta), means.size());
  for (std::size_t t = 1; t <= rows.size(); ++t) {
    const auto d = det->step(rows[t - 1]);
    double want = 0.0;
    for (std::size_t n = 0; n < means.size(); ++n) {
      double best = 0.0, tail = 0.0; // k = t gives the empty window
      for (std::size_t k = t; k-- > 0;) {
        tail += delta * rows[k][n] - 0.5 * delta * delta;
        best = std::max(best, tail);
      }
      want += best;
    }
    CHECK(d.score == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("Mei statistic grows by delta^2/2 per step on a matched stream") {
  auto det = make_detector(config(Rule::mei, 0.1, 1e300, 50, 1.5), 1);
  const std::vector<double> y{1.5};
  for (int t = 1; t <= 20; ++t)
    CHECK(det->step(y).score == doctest::Approx(0.5 * 2.25 * t));
}

TEST_CASE("TV examples") {
  const std::size_t n = 6;
  const double delta = 0.7;
  auto det = make_detector(config(Rule::tv, 1.0, 1e300, 100, delta), n);
  const std::vector<double> y(n, delta);
  Decision d;
  for (int t = 1; t <= 30; ++t) {
    d = det->step(y);
    CHECK(d.score == doctest::Approx(n * 0.5 * delta * delta * t));
  }
  CHECK(d.argmax_k == 0);

  // with every log-likelihood positive the positive part in T3(1, delta) is inactive
  const std::vector<double> strong(n, 2.0);
  auto tv = make_detector(config(Rule::tv, 1.0, 1e300, 100, delta), n);
  auto t3 = make_detector(config(Rule::t3, 1.0, 1e300, 100, delta), n);
  for (int t = 1; t <= 30; ++t)
    CHECK(tv->step(strong).score == doctest::Approx(t3->step(strong).score));
}

TEST_CASE("TV carries negative drift that T3 truncates") {
  std::vector<double> means{1.0, 0.0};
  const auto rows = gaussian_rows(47, 200, 2, means);
  auto tv = make_detector(config(Rule::tv, 1.0, 1e300, 200), 2);
  auto t3 = make_detector(config(Rule::t3, 1.0, 1e300, 200), 2);
  double tv_last = 0.0, t3_last = 0.0;
  for (const auto &row : rows) {
    tv_last = tv->step(row).score;
    t3_last = t3->step(row).score;
    CHECK(tv_last <= t3_last + 1e-9);
  }
  // the null stream costs about delta^2/2 per step in TV
  CHECK(t3_last - tv_last > 20.0);
}

TEST_CASE("parallel rule stops at the earliest component") {
  const std::size_t n = 40;
  std::vector<double> means(n, 0.0);
  for (std::size_t i = 0; i < 4; ++i)
    means[i] = 1.0;
  for (std::uint64_t seed = 50; seed < 60; ++seed) {
    const auto rows = gaussian_rows(seed, 300, n, means);
    const auto par = parallel_config(12.0, 30.0);
    auto det = make_detector(par, n);
    const auto d = run_until_stop(*det, rows);
    std::int64_t earliest = std::numeric_limits<std::int64_t>::max();
    std::size_t first = 0;
    for (std::size_t c = 0; c < par.components.size(); ++c) {
      const auto &comp = par.components[c];
      const auto t = testing::stop_time(config(comp.rule, comp.p0, comp.b), rows);
      if (t > 0 && t < earliest) {
        earliest = t;
        first = c;
      }
    }
    REQUIRE(d.stopped);
    CHECK(d.stop_time == earliest);
    CHECK(d.component == first);
    CHECK(det->component_scores().size() == 2);
  }
}

TEST_CASE("snapshot and restore reproduce later decisions") {
  const std::size_t n = 20;
  std::vector<double> means(n, 0.0);
  means[0] = 0.6;
  const auto rows = gaussian_rows(61, 240, n, means);
  std::vector<DetectorConfig> configs;
  for (Rule rule : kWindowRules)
    configs.push_back(config(rule, 0.1, 1e300, 30));
  configs.push_back(config(Rule::mei, 0.1, 1e300));
  configs.push_back(parallel_config(1e300, 1e300, 30));
  configs.push_back(profile_config(1e300));
  for (const auto &cfg : configs) {
    auto det = make_detector(cfg, n);
    for (std::size_t t = 0; t < 100; ++t)
      det->step(rows[t]);
    const auto text = det->snapshot().dump();
    auto copy = restore_detector(nlohmann::json::parse(text));
    CHECK(copy->time() == det->time());
    for (std::size_t t = 100; t < rows.size(); ++t) {
      const auto a = det->step(rows[t]);
      const auto b = copy->step(rows[t]);
      CHECK(a.score == b.score);
      CHECK(a.argmax_k == b.argmax_k);
      CHECK(a.stopped == b.stopped);
    }
  }
}

TEST_CASE("a stop always carries a score at or above the threshold") {
  const std::vector<double> means(15, 0.3);
  const auto rows = gaussian_rows(62, 300, 15, means);
  for (Rule rule : kWindowRules) {
    auto det = make_detector(config(rule, 0.1, 9.0), 15);
    for (const auto &row : rows) {
      const auto d = det->step(row);
      CHECK(d.stopped == (d.score >= 9.0));
    }
  }
}

TEST_CASE("contributions sum to the score at the reported k") {
  const std::vector<double> means(10, 0.5);
  const auto rows = gaussian_rows(63, 60, 10, means);
  for (Rule rule : {Rule::t1, Rule::t2, Rule::t3, Rule::t4, Rule::tv}) {
    auto det = make_detector(config(rule, 0.1, 1e300), 10);
    Decision d;
    for (const auto &row : rows)
      d = det->step(row);
    const auto c = det->contributions();
    REQUIRE(c.size() == 10);
    CHECK(std::accumulate(c.begin(), c.end(), 0.0) == doctest::Approx(d.score).epsilon(1e-12));
  }
}

TEST_CASE("detector config json round trip") {
  auto cfg = parallel_config(21.2, 87.7, 200);
  cfg.m0 = 2;
  const auto back = detector_config_from_json(to_json(cfg));
  CHECK(back.rule == cfg.rule);
  CHECK(back.components == cfg.components);
  CHECK(back.m0 == 2);
  const auto prof = profile_config(26.3);
  CHECK(detector_config_from_json(to_json(prof)).profile == prof.profile);
}
