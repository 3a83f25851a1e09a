// mixcpd: calibrate, simulate, detect, reproduce and analyze from the command line.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mixcpd/analytics.hpp"
#include "mixcpd/config.hpp"
#include "mixcpd/csv.hpp"
#include "mixcpd/detector.hpp"
#include "mixcpd/errors.hpp"
#include "mixcpd/kernels.hpp"
#include "mixcpd/montecarlo.hpp"
#include "mixcpd/profile.hpp"
#include "mixcpd/quadrature.hpp"
#include "mixcpd/reproduce.hpp"

using namespace mixcpd;
using nlohmann::json;

namespace {

constexpr int kExitStopped = 0;
constexpr int kExitError = 1;
constexpr int kExitExhausted = 2;

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ParameterError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Config file plus per-key flags; flags win over the file.
struct ConfigOptions {
  std::string config_path;
  std::map<std::string, std::string> flags;

  void attach(CLI::App &app) {
    app.add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    for (const auto &key : RunConfig::keys())
      app.add_option("--" + dashed(key), flags[key], "config key " + key);
  }

  RunConfig build(const CLI::App &app) const {
    RunConfig c = config_path.empty() ? RunConfig{} : RunConfig::parse(read_file(config_path));
    for (const auto &key : RunConfig::keys())
      if (app.count("--" + dashed(key)) > 0)
        c.set(key, flags.at(key));
    c.validate();
    return c;
  }
};

json opt_number(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

json record(std::string_view command, const RunConfig &c, double value, double std_error,
            std::optional<double> theory, std::optional<double> tolerance, std::optional<bool> pass) {
  return {{"command", command},
          {"config_hash", c.hash_hex()},
          {"seed", c.seed},
          {"value", value},
          {"std_error", std_error},
          {"theory_value", opt_number(theory)},
          {"tolerance", opt_number(tolerance)},
          {"pass", pass ? json(*pass) : json(nullptr)}};
}

/// Machine records go to stdout in jsonl format and always to `output` when set.
class Records {
public:
  explicit Records(const RunConfig &c) : format_(c.format) {
    if (!c.output.empty()) {
      file_.open(c.output, std::ios::trunc);
      if (!file_)
        throw ParameterError("cannot write '" + c.output + "'");
    }
  }
  bool text() const { return format_ == OutputFormat::text; }
  void emit(const json &j) {
    const std::string line = j.dump();
    if (!text())
      std::cout << line << '\n';
    if (file_)
      file_ << line << '\n';
  }

private:
  OutputFormat format_;
  std::ofstream file_;
};

bool has_gspec(Rule r) {
  return r == Rule::t1 || r == Rule::t2 || r == Rule::t3 || r == Rule::t4 || r == Rule::tmax;
}

std::optional<ArlResult> theory_arl(const RunConfig &c) {
  if (!has_gspec(c.rule))
    return std::nullopt;
  try {
    return arl(rule_gspec(c.rule, c.p0, c.delta), c.N, c.b, c.m0, c.m1);
  } catch (const Error &) {
    return std::nullopt;
  }
}

double profile_area(const RunConfig &c) {
  const SensorGrid grid(c.rows, c.cols, c.spacing);
  return ProfileModel::for_grid(grid, c.betas, c.candidate_spacing).area();
}

// ---------------------------------------------------------------- calibrate

int cmd_calibrate(const RunConfig &c) {
  if (!c.target_arl && !(c.tail_m && c.alpha))
    throw ParameterError("calibrate needs target_arl, or tail_m together with alpha");
  Records out(c);
  std::optional<double> analytic;
  std::optional<ArlResult> diag;
  const double target = c.target_arl ? *c.target_arl : -static_cast<double>(*c.tail_m) / std::log1p(-*c.alpha);
  if (has_gspec(c.rule)) {
    const auto g = rule_gspec(c.rule, c.p0, c.delta);
    analytic = calibrate_threshold(g, c.N, target, c.m0, c.m1);
    diag = arl(g, c.N, *analytic, c.m0, c.m1);
  } else if (c.rule == Rule::profile) {
    const double area = profile_area(c);
    const double beta = c.betas.front();
    const auto f = [&](double b) { return std::log(profile_arl(b, beta, area, c.m0, c.m1)) - std::log(target); };
    double hi = 10.0;
    while (f(hi) < 0.0 && hi < 1e4)
      hi *= 2.0;
    // the approximation diverges as b -> 0, so bracket from above
    double lo = 0.5 * hi;
    while (f(lo) > 0.0 && lo > 1e-3)
      lo *= 0.5;
    analytic = solve_bracketed(f, lo, hi);
  }

  std::optional<EmpiricalCalibration> empirical;
  if (c.tail_m && c.alpha)
    empirical = calibrate_empirical(c.detector_config(), c.N, TailTarget{*c.tail_m, *c.alpha}, c.trials, c.seed,
                                    c.threads);

  if (out.text()) {
    std::printf("rule %s  N=%zu  m0=%lld  m1=%lld  target ARL %.6g\n", std::string(to_string(c.rule)).c_str(), c.N,
                static_cast<long long>(c.m0), static_cast<long long>(c.m1), target);
    if (analytic)
      std::printf("analytic b = %.6f\n", *analytic);
    if (diag)
      std::printf("  theta %.6g  psi %.6g  psi' %.6g  psi'' %.6g  gamma %.6g  log H %.6g  nu-integral %.6g\n",
                  diag->theta, diag->moments.psi, diag->moments.psi_dot, diag->moments.psi_ddot, diag->moments.gamma,
                  diag->log_h, diag->nu_integral);
    if (analytic && (diag || c.rule == Rule::profile)) {
      const double a = diag ? diag->arl : target;
      std::printf("  predicted tail P{T <= m}:\n");
      for (double frac : {0.01, 0.05, 0.1, 0.25, 0.5, 1.0}) {
        const double m = std::round(frac * a);
        std::printf("    m = %-10.0f %.5f\n", m, tail_prob_from_arl(a, m).exponential);
      }
    }
    if (empirical)
      for (std::size_t i = 0; i < empirical->thresholds.size(); ++i)
        std::printf("empirical b%s = %.6f  (%zu trials, P{T <= %lld} = %.4g)\n",
                    empirical->thresholds.size() > 1 ? std::to_string(i + 1).c_str() : "",
                    empirical->thresholds[i], empirical->n_trials, static_cast<long long>(*c.tail_m), *c.alpha);
  }
  if (empirical) {
    for (double b : empirical->thresholds)
      out.emit(record("calibrate", c, b, 0.0, analytic, std::nullopt, std::nullopt));
  } else if (analytic) {
    out.emit(record("calibrate", c, *analytic, 0.0, analytic, std::nullopt, std::nullopt));
  } else {
    throw ParameterError("no analytic ARL for rule " + std::string(to_string(c.rule)) +
                         "; give tail_m and alpha for an empirical threshold");
  }
  return 0;
}

// ---------------------------------------------------------------- simulate

std::optional<double> theory_edd(const RunConfig &c, const Scenario &s) {
  if (!has_gspec(c.rule) || c.rule == Rule::tmax)
    return std::nullopt;
  try {
    const auto g = rule_gspec(c.rule, c.p0, c.delta);
    if (c.rule == Rule::t2 || c.rule == Rule::t4)
      return edd_theorem2(g, c.N, c.b, s, c.m1).value;
    return edd_crude(g, c.N, c.b, s, c.m0, c.m1).value;
  } catch (const Error &) {
    return std::nullopt;
  }
}

int cmd_simulate(const RunConfig &c) {
  Records out(c);
  TrialPlan plan;
  plan.detector = c.detector_config();
  plan.n_trials = c.trials;
  plan.seed = c.seed;
  plan.threads = c.threads;
  plan.cap = c.cap;
  plan.mode = c.run_mode;

  Estimate est;
  std::optional<double> theory;
  if (c.mode == SimMode::arl) {
    plan.scenario = Scenario::null(c.N, c.seed);
    const auto t = theory_arl(c);
    if (t)
      theory = t->arl;
    plan.horizon = c.horizon;
    if (plan.mode == RunMode::tail_shortcut && plan.horizon == 0) {
      // predicted P{T <= m} about 0.1; without a prediction fall back to full runs
      if (theory && *theory > 20.0)
        plan.horizon = static_cast<std::int64_t>(std::ceil(-*theory * std::log(0.9)));
      else
        plan.mode = RunMode::full_run;
    }
    est = estimate_arl(plan);
  } else {
    plan.scenario = c.scenario();
    if (!plan.scenario.change_point || plan.scenario.affected.empty())
      throw ParameterError("edd mode needs affected or affected_list");
    plan.mode = RunMode::full_run;
    est = estimate_edd(plan, c.count);
    if (c.kappa == 0)
      theory = theory_edd(c, plan.scenario);
  }

  if (out.text()) {
    const double z = 1.959963984540054;
    std::printf("%-10s %-14s %-14s\n", to_string(c.mode).data(), "simulated", "theory");
    std::printf("%-10s %-14.4g %-14s\n", std::string(to_string(c.rule)).c_str(), est.value,
                theory ? std::to_string(*theory).c_str() : "-");
    std::printf("  95%% CI [%.4g, %.4g]  se %.3g  trials %zu  censored %zu  method %s\n",
                est.value - z * est.std_error, est.value + z * est.std_error, est.std_error, est.n_trials,
                est.censored, est.method.c_str());
  }
  out.emit(record("simulate", c, est.value, est.std_error, theory, std::nullopt, std::nullopt));
  return 0;
}

// ---------------------------------------------------------------- detect

int cmd_detect(RunConfig c, const std::string &path) {
  CsvData data;
  if (path == "-") {
    data = read_csv(std::cin);
  } else {
    std::ifstream in(path);
    if (!in)
      throw ParameterError("cannot open '" + path + "'");
    data = read_csv(in);
  }
  c.N = data.names.size();
  c.affected.reset();
  c.affected_list.clear();
  c.validate();
  Records out(c);

  auto detector = make_detector(c.detector_config(), c.N);
  const Decision d = run_until_stop(*detector, data.rows);

  if (out.text()) {
    if (d.stopped) {
      std::printf("stopped at T = %lld  k = %lld  score %.6g  threshold %.6g\n", static_cast<long long>(d.stop_time),
                  static_cast<long long>(d.argmax_k), d.score, d.threshold);
      if (d.component)
        std::printf("  component %zu\n", *d.component + 1);
      if (d.argmax_z)
        std::printf("  candidate source %zu\n", *d.argmax_z);
      const auto contrib = detector->contributions();
      if (!contrib.empty()) {
        std::vector<std::size_t> order(contrib.size());
        std::iota(order.begin(), order.end(), 0);
        const std::size_t top = std::min<std::size_t>(5, order.size());
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                          [&](std::size_t a, std::size_t b) { return contrib[a] > contrib[b]; });
        std::printf("  top contributors:\n");
        for (std::size_t i = 0; i < top; ++i)
          std::printf("    %-16s %.6g\n", data.names[order[i]].c_str(), contrib[order[i]]);
      }
    } else {
      std::printf("no detection in %zu rows (last score %.6g, threshold %.6g)\n", data.rows.size(), d.score,
                  d.threshold);
    }
  }
  json j = record("detect", c, d.stopped ? static_cast<double>(d.stop_time) : 0.0, 0.0, std::nullopt, std::nullopt,
                  std::nullopt);
  j["stopped"] = d.stopped;
  j["argmax_k"] = d.argmax_k;
  j["score"] = std::isfinite(d.score) ? json(d.score) : json(nullptr);
  out.emit(j);
  return d.stopped ? kExitStopped : kExitExhausted;
}

// ---------------------------------------------------------------- reproduce

int cmd_reproduce(const RunConfig &c, const std::string &id, bool theory_only) {
  Records out(c);
  ReproduceOptions opt;
  opt.trials = c.trials;
  opt.seed = c.seed;
  opt.threads = c.threads;
  opt.theory_only = theory_only;
  const auto cells = reproduce_table(id, opt);
  std::size_t passed = 0, judged = 0;
  if (out.text())
    std::printf("%-36s %-9s %12s %10s %12s %10s  %s\n", "cell", "kind", "value", "se", "printed", "tol", "result");
  for (const auto &cell : cells) {
    if (cell.pass) {
      ++judged;
      passed += *cell.pass ? 1 : 0;
    }
    if (out.text())
      std::printf("%-36s %-9s %12.5g %10.3g %12s %10.3g  %s%s%s\n", cell.label.c_str(), cell.kind.c_str(), cell.value,
                  cell.std_error, cell.reference ? std::to_string(*cell.reference).substr(0, 10).c_str() : "-",
                  cell.tolerance, cell.pass ? (*cell.pass ? "PASS" : "FAIL") : "-", cell.note.empty() ? "" : "  ",
                  cell.note.c_str());
    json j = record("reproduce", c, cell.value, cell.std_error, cell.reference,
                    cell.reference ? std::optional<double>(cell.tolerance) : std::nullopt, cell.pass);
    j["table"] = cell.table;
    j["cell"] = cell.label;
    j["kind"] = cell.kind;
    out.emit(j);
  }
  if (out.text())
    std::printf("table %s: %zu of %zu judged cells within tolerance\n", id.c_str(), passed, judged);
  return 0;
}

// ---------------------------------------------------------------- analyze

int cmd_analyze(const RunConfig &c) {
  Records out(c);
  if (c.rule == Rule::profile) {
    const double area = profile_area(c);
    const double a = profile_arl(c.b, c.betas.front(), area, c.m0, c.m1);
    if (out.text()) {
      std::printf("profile ARL %.6g  (|D| = %.6g, beta = %.4g)\n", a, area, c.betas.front());
      if (c.tail_m)
        std::printf("  P{T <= %lld} = %.5f\n", static_cast<long long>(*c.tail_m),
                    profile_tail_prob(c.b, c.betas.front(), area, c.m0, c.m1, static_cast<double>(*c.tail_m)));
    }
    out.emit(record("analyze", c, a, 0.0, a, std::nullopt, std::nullopt));
    return 0;
  }
  if (!has_gspec(c.rule))
    throw ParameterError("no analytic approximation for rule " + std::string(to_string(c.rule)));
  const auto r = arl(rule_gspec(c.rule, c.p0, c.delta), c.N, c.b, c.m0, c.m1);
  std::optional<double> edd;
  if (c.affected || !c.affected_list.empty()) {
    RunConfig at_zero = c;
    at_zero.kappa = 0;
    edd = theory_edd(at_zero, at_zero.scenario());
  }
  if (out.text()) {
    std::printf("ARL %.6g  (theta %.6g, gamma %.6g)\n", r.arl, r.theta, r.moments.gamma);
    if (c.tail_m)
      std::printf("  P{T <= %lld} = %.5f\n", static_cast<long long>(*c.tail_m),
                  tail_prob_from_arl(r.arl, static_cast<double>(*c.tail_m)).exponential);
    if (edd)
      std::printf("EDD %.4f\n", *edd);
  }
  out.emit(record("analyze", c, r.arl, 0.0, r.arl, std::nullopt, std::nullopt));
  if (edd)
    out.emit(record("analyze", c, *edd, 0.0, *edd, std::nullopt, std::nullopt));
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Mixture change-point detection for parallel data streams"};
  app.require_subcommand(1);
  std::string isa;
  app.add_option("--isa", isa, "kernel set: scalar or avx2 (default: best available)");

  auto *calibrate = app.add_subcommand("calibrate", "threshold for a target ARL or tail probability");
  auto *simulate = app.add_subcommand("simulate", "Monte Carlo ARL or EDD next to the analytic value");
  auto *detect = app.add_subcommand("detect", "run a detector over a CSV file");
  auto *reproduce = app.add_subcommand("reproduce", "regenerate a published table against its golden values");
  auto *analyze = app.add_subcommand("analyze", "analytic ARL, tail probability and EDD");

  ConfigOptions cal_opts, sim_opts, det_opts, rep_opts, ana_opts;
  cal_opts.attach(*calibrate);
  sim_opts.attach(*simulate);
  det_opts.attach(*detect);
  rep_opts.attach(*reproduce);
  ana_opts.attach(*analyze);

  std::string data_path;
  detect->add_option("data", data_path, "CSV file, one row per time step ('-' reads stdin)")->required();
  std::string table_id;
  bool theory_only = false;
  reproduce->add_option("table", table_id, "1-7 or fig1")->required();
  reproduce->add_flag("--theory-only", theory_only, "skip Monte Carlo cells");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }

  try {
    if (!isa.empty())
      simd::set_active_isa(simd::parse_isa(isa));
    if (calibrate->parsed())
      return cmd_calibrate(cal_opts.build(*calibrate));
    if (simulate->parsed())
      return cmd_simulate(sim_opts.build(*simulate));
    if (detect->parsed()) {
      RunConfig c = det_opts.config_path.empty() ? RunConfig{} : RunConfig::parse(read_file(det_opts.config_path));
      for (const auto &key : RunConfig::keys())
        if (detect->count("--" + dashed(key)) > 0)
          c.set(key, det_opts.flags.at(key));
      return cmd_detect(std::move(c), data_path);
    }
    if (reproduce->parsed()) {
      const auto ids = table_ids();
      if (std::find(ids.begin(), ids.end(), table_id) == ids.end()) {
        std::cerr << "usage error: unknown table '" << table_id << "'; expected 1-7 or fig1\n";
        return kExitError;
      }
      return cmd_reproduce(rep_opts.build(*reproduce), table_id, theory_only);
    }
    if (analyze->parsed())
      return cmd_analyze(ana_opts.build(*analyze));
  } catch (const ParseError &e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
