#include <doctest.h>

#include <limits>
#include <random>
#include <string>

#include "mixcpd/config.hpp"
#include "mixcpd/errors.hpp"

using namespace mixcpd;

TEST_CASE("parse reads keys, comments and lists") {
  const auto c = RunConfig::parse("# table 6\nrule = parallel\nN = 400\n"
                                  "components = T2:0.02:21.2; T2:0.33:87.7\n"
                                  "betas = 0.5, 1, 5   # beta candidates\n"
                                  "target_arl = 5000\n");
  CHECK(c.rule == Rule::parallel);
  CHECK(c.N == 400);
  REQUIRE(c.components.size() == 2);
  CHECK(c.components[1].p0 == 0.33);
  CHECK(c.components[1].b == 87.7);
  CHECK(c.betas == std::vector<double>{0.5, 1.0, 5.0});
  CHECK(c.target_arl == 5000.0);
  CHECK_FALSE(c.alpha.has_value());
  CHECK(c.has("target_arl"));
  CHECK_FALSE(c.has("alpha"));
}

TEST_CASE("parse errors carry the line and column") {
  try {
    RunConfig::parse("rule = T2\n\n  bogus = 3\n");
    FAIL("expected a parse error");
  } catch (const ParseError &e) {
    CHECK(e.row() == 3);
    CHECK(e.column() == 3);
  }
  try {
    RunConfig::parse("N = many\n");
    FAIL("expected a parse error");
  } catch (const ParseError &e) {
    CHECK(e.row() == 1);
  }
  CHECK_THROWS_AS(RunConfig::parse("rule T2\n"), ParseError);
}

TEST_CASE("parse, serialize, parse is the identity") {
  std::mt19937_64 gen(101);
  std::uniform_real_distribution<double> u(0.001, 0.999);
  for (int rep = 0; rep < 50; ++rep) {
    RunConfig c;
    c.rule = rep % 3 == 0 ? Rule::t4 : Rule::t2;
    c.N = 1 + gen() % 1000;
    c.p0 = u(gen);
    c.b = 100.0 * u(gen);
    c.delta = 3.0 * u(gen);
    c.m1 = 10 + static_cast<std::int64_t>(gen() % 500);
    c.seed = gen();
    c.trials = 1 + gen() % 999;
    if (rep % 2) {
      c.target_arl = 1000.0 / u(gen);
      c.tail_m = 250;
      c.alpha = u(gen);
      c.affected = 3;
    } else {
      c.affected_list = {1, 5, 9};
    }
    c.components = {{Rule::t2, u(gen), 1.0, 10.0 * u(gen)}, {Rule::t4, u(gen), u(gen), 50.0 * u(gen)}};
    c.betas = {u(gen), 1.0 + u(gen)};
    c.mode = rep % 2 ? SimMode::edd : SimMode::arl;
    c.run_mode = rep % 2 ? RunMode::full_run : RunMode::tail_shortcut;
    c.count = rep % 2 ? DelayCount::stopping_time : DelayCount::inclusive;
    c.format = OutputFormat::jsonl;
    c.output = "out.jsonl";
    const auto text = c.serialize();
    const auto back = RunConfig::parse(text);
    CHECK(back == c);
    CHECK(back.serialize() == text);
    CHECK(back.hash() == c.hash());
  }
}

TEST_CASE("set and get use the same text") {
  RunConfig c;
  for (const auto &key : RunConfig::keys())
    if (c.has(key))
      c.set(key, c.get(key));
  CHECK(c == RunConfig{});
  CHECK_THROWS_AS(c.set("nope", "1"), ParameterError);
  c.set("b", "19.5");
  CHECK(c.get("b") == "19.5");
  CHECK(c.hash_hex().size() == 16);
}

TEST_CASE("validation") {
  RunConfig c;
  c.target_arl = 1.0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c.target_arl.reset();
  c.alpha = 1.5;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c.alpha.reset();
  c.rule = Rule::profile;
  c.N = 100;
  CHECK_THROWS(c.validate());
  c.N = 625;
  CHECK_NOTHROW(c.validate());
  c.affected = 700;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("scenario and detector views") {
  RunConfig c;
  c.N = 50;
  c.affected = 5;
  c.mu = 1.5;
  c.kappa = 10;
  const auto s = c.scenario();
  CHECK(s.affected_count() == 5);
  CHECK(s.change_point == 10);
  CHECK(s.mean_vector()[4] == 1.5);
  c.affected.reset();
  CHECK_FALSE(c.scenario().change_point.has_value());
  c.b = 7.0;
  CHECK(c.detector_config().b == 7.0);
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
}
