#include "mixcpd/reproduce.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mixcpd/reference_tables_data.hpp"
#include "mixcpd/analytics.hpp"
#include "mixcpd/errors.hpp"
#include "mixcpd/montecarlo.hpp"
#include "mixcpd/profile.hpp"

namespace mixcpd {

using nlohmann::json;

namespace {

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

CellResult judged(std::string table, std::string label, std::string kind, double value, double se,
                  std::optional<double> reference, double tolerance) {
  CellResult c{std::move(table), std::move(label), std::move(kind), value, se, reference, tolerance, {}, {}};
  if (reference)
    c.pass = std::abs(value - *reference) <= tolerance;
  return c;
}

std::size_t printed_trials() { return reference_tables().at("tolerance_rules").at("printed_trials").get<std::size_t>(); }
double mc_band() { return reference_tables().at("tolerance_rules").at("mc_combined_se").get<double>(); }
double edd_abs() { return reference_tables().at("tolerance_rules").at("theory_edd_abs").get<double>(); }

DetectorConfig windowed(Rule rule, double p0, double delta, double b, std::int64_t m0, std::int64_t m1) {
  DetectorConfig d;
  d.rule = rule;
  d.p0 = p0;
  d.delta = delta;
  d.b = b;
  d.m0 = m0;
  d.m1 = m1;
  return d;
}

std::size_t affected_count(double p, std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(p * static_cast<double>(n))));
}

/// Tail-shortcut ARL with the horizon set for P{T <= m} about 0.1 at the printed ARL.
CellResult mc_arl_cell(const std::string &table, const std::string &label, const DetectorConfig &det, std::size_t n,
                       double printed_arl, const ReproduceOptions &opt, std::uint64_t seed) {
  TrialPlan plan;
  plan.detector = det;
  plan.scenario = Scenario::null(n);
  plan.n_trials = opt.trials;
  plan.horizon = static_cast<std::int64_t>(std::ceil(-printed_arl * std::log(0.9)));
  plan.seed = seed;
  plan.mode = RunMode::tail_shortcut;
  plan.threads = opt.threads;
  const Estimate e = estimate_arl(plan);
  // a printed full-run mean of exponential times has sd equal to its mean
  const double se = std::hypot(e.std_error, printed_se(printed_arl, printed_trials()));
  auto cell = judged(table, label, "mc", e.value, e.std_error, printed_arl, mc_band() * se);
  cell.note = "m = " + std::to_string(plan.horizon);
  return cell;
}

CellResult mc_edd_cell(const std::string &table, const std::string &label, const DetectorConfig &det,
                       const Scenario &scenario, std::optional<double> printed, const ReproduceOptions &opt,
                       std::uint64_t seed) {
  TrialPlan plan;
  plan.detector = det;
  plan.scenario = scenario;
  plan.n_trials = opt.trials;
  plan.seed = seed;
  plan.mode = RunMode::full_run;
  plan.threads = opt.threads;
  const Estimate e = estimate_edd(plan, DelayCount::inclusive);
  const double sd = e.std_error * std::sqrt(static_cast<double>(e.n_trials));
  const double se = std::hypot(e.std_error, printed_se(sd, printed_trials()));
  auto cell = judged(table, label, "mc", e.value, e.std_error, printed, mc_band() * se);
  if (e.censored > 0)
    cell.note = std::to_string(e.censored) + " censored";
  return cell;
}

std::uint64_t cell_seed(const ReproduceOptions &opt, std::uint64_t table, std::uint64_t cell) {
  return opt.seed * 1'000'003ULL + table * 1'000ULL + cell;
}

std::vector<CellResult> arl_table(const std::string &id, const json &t, Rule rule, const ReproduceOptions &opt) {
  std::vector<CellResult> out;
  const auto n = t.at("N").get<std::size_t>();
  const auto m0 = t.at("m0").get<std::int64_t>();
  const auto m1 = t.at("m1").get<std::int64_t>();
  const int digits = reference_tables().at("tolerance_rules").at("theory_sig_digits").get<int>();
  std::uint64_t cell = 0;
  for (const auto &row : t.at("rows")) {
    const double p0 = row.at("p0").get<double>();
    const double b = row.at("b").get<double>();
    const std::string label = std::string(to_string(rule)) + "(" + fmt(p0) + ") b=" + fmt(b);
    const double theory_ref = row.at("theory").get<double>();
    const auto r = arl_theorem1(rule_gspec(rule, p0, 1.0), n, b, m0, m1);
    out.push_back(judged(id, label, "theory", r.arl, 0.0, theory_ref, sig_digit_tolerance(theory_ref, digits)));
    if (!opt.theory_only)
      out.push_back(mc_arl_cell(id, label, windowed(rule, p0, 1.0, b, m0, m1), n, row.at("mc").get<double>(), opt,
                                cell_seed(opt, std::stoull(id), cell)));
    ++cell;
  }
  return out;
}

std::vector<CellResult> table3(const json &t, const ReproduceOptions &opt) {
  std::vector<CellResult> out;
  const auto n = t.at("N").get<std::size_t>();
  const auto m0 = t.at("m0").get<std::int64_t>();
  const auto m1 = t.at("m1").get<std::int64_t>();
  const double mu = t.at("mu").get<double>();
  std::uint64_t cell = 0;
  for (const auto &row : t.at("rows")) {
    const double p = row.at("p").get<double>();
    const double p0 = row.at("p0").get<double>();
    const Scenario scenario = Scenario::leading(n, affected_count(p, n), mu, 0);
    for (Rule rule : {Rule::t2, Rule::t4}) {
      const std::string name(to_string(rule));
      const double b = t.at("thresholds").at(name).at(fmt(p0)).get<double>();
      const std::string label = name + "(" + fmt(p0) + ") p=" + fmt(p);
      const auto e = edd_theorem2(rule_gspec(rule, p0, 1.0), n, b, scenario, m1);
      auto c = judged("3", label, "theory", e.value, 0.0, row.at(name + "_theory").get<double>(), edd_abs());
      if (e.window_warning)
        c.note = "m1 below twice the first-order delay";
      out.push_back(std::move(c));
      if (!opt.theory_only)
        out.push_back(mc_edd_cell("3", label, windowed(rule, p0, 1.0, b, m0, m1), scenario,
                                  row.at(name + "_mc").get<double>(), opt, cell_seed(opt, 3, cell)));
      ++cell;
    }
  }
  return out;
}

DetectorConfig table4_detector(const json &r, std::int64_t m0, std::int64_t m1) {
  return windowed(parse_rule(r.at("rule").get<std::string>()), r.at("p0").get<double>(),
                  r.at("delta").get<double>(), r.at("b").get<double>(), m0, m1);
}

std::vector<CellResult> table4(const json &t, const ReproduceOptions &opt) {
  std::vector<CellResult> out;
  const auto n = t.at("N").get<std::size_t>();
  const auto m0 = t.at("m0").get<std::int64_t>();
  const auto m1 = t.at("m1").get<std::int64_t>();
  std::uint64_t cell = 0;
  for (const auto &r : t.at("rules")) {
    const auto det = table4_detector(r, m0, m1);
    const std::string label = r.at("name").get<std::string>() + " b=" + fmt(det.b);
    if (det.rule == Rule::t2 || det.rule == Rule::t3) {
      const auto theory = arl(rule_gspec(det.rule, det.p0, det.delta), n, det.b, m0, m1);
      out.push_back(judged("4", label, "theory", theory.arl, 0.0, std::nullopt, 0.0));
    }
    if (!opt.theory_only)
      out.push_back(mc_arl_cell("4", label, det, n, r.at("mc").get<double>(), opt, cell_seed(opt, 4, cell)));
    ++cell;
  }
  return out;
}

std::vector<CellResult> table5(const json &t, const json &t4, const ReproduceOptions &opt) {
  std::vector<CellResult> out;
  const auto n = t.at("N").get<std::size_t>();
  const auto m0 = t.at("m0").get<std::int64_t>();
  const auto m1 = t.at("m1").get<std::int64_t>();
  const auto mus = t.at("mus").get<std::vector<double>>();
  const auto columns = t.at("columns").get<std::vector<std::string>>();
  std::vector<DetectorConfig> dets;
  for (const auto &name : columns)
    for (const auto &r : t4.at("rules"))
      if (r.at("name") == name)
        dets.push_back(table4_detector(r, m0, m1));
  std::uint64_t cell = 0;
  for (const auto &row : t.at("rows")) {
    const double p = row.at("p").get<double>();
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto &det = dets[c];
      for (std::size_t j = 0; j < mus.size(); ++j, ++cell) {
        const Scenario scenario = Scenario::leading(n, affected_count(p, n), mus[j], 0);
        const std::string label = columns[c] + " p=" + fmt(p) + " mu=" + fmt(mus[j]);
        const auto &th = row.at("theory").at(c);
        if (!th.is_null()) {
          const auto g = rule_gspec(det.rule, det.p0, det.delta);
          const auto e = det.rule == Rule::t2 ? edd_theorem2(g, n, det.b, scenario, m1)
                                              : edd_crude(g, n, det.b, scenario, m0, m1);
          out.push_back(judged("5", label, "theory", e.value, 0.0, th.at(j).get<double>(), edd_abs()));
        }
        if (!opt.theory_only)
          out.push_back(mc_edd_cell("5", label, det, scenario, row.at("mc").at(c).at(j).get<double>(), opt,
                                    cell_seed(opt, 5, cell)));
      }
    }
  }
  return out;
}

DetectorConfig parallel_detector(const json &t, std::int64_t m0, std::int64_t m1) {
  DetectorConfig d = windowed(Rule::parallel, 0.1, 1.0, 0.0, m0, m1);
  for (const auto &c : t.at("parallel"))
    d.components.push_back({Rule::t2, c.at("p0").get<double>(), 1.0, c.at("b").get<double>()});
  return d;
}

std::vector<CellResult> table6(const json &t, const ReproduceOptions &opt) {
  std::vector<CellResult> out;
  if (opt.theory_only)
    return out;
  const auto n = t.at("N").get<std::size_t>();
  const auto m0 = t.at("m0").get<std::int64_t>();
  const auto m1 = t.at("m1").get<std::int64_t>();
  const auto single = windowed(Rule::t2, t.at("single").at("p0").get<double>(), 1.0,
                               t.at("single").at("b").get<double>(), m0, m1);
  const auto parallel = parallel_detector(t, m0, m1);

  const auto &cal = t.at("calibration");
  const auto horizon = cal.at("horizon").get<std::int64_t>();
  const auto single_cal = calibrate_empirical(single, n, {horizon, cal.at("alpha_single").get<double>()}, opt.trials,
                                              cell_seed(opt, 6, 900), opt.threads);
  out.push_back(judged("6", "single T2(0.1) b", "threshold", single_cal.thresholds.at(0), 0.0, single.b,
                       0.05 * single.b));
  const auto par_cal = calibrate_empirical(parallel, n, {horizon, cal.at("alpha_component").get<double>()},
                                           opt.trials, cell_seed(opt, 6, 901), opt.threads);
  for (std::size_t c = 0; c < parallel.components.size(); ++c) {
    const auto &comp = parallel.components[c];
    out.push_back(judged("6", "parallel b" + std::to_string(c + 1) + " T2(" + fmt(comp.p0) + ")", "threshold",
                         par_cal.thresholds.at(c), 0.0, comp.b, 0.05 * comp.b));
  }

  std::uint64_t cell = 0;
  for (const auto &row : t.at("rows")) {
    const double p = row.at("p").get<double>();
    const double mu = row.at("mu").get<double>();
    const Scenario scenario = Scenario::leading(n, affected_count(p, n), mu, 0);
    const std::string tag = " p=" + fmt(p) + " mu=" + fmt(mu);
    // common random numbers across the two rules
    const auto seed = cell_seed(opt, 6, cell++);
    out.push_back(mc_edd_cell("6", "single" + tag, single, scenario, row.at("single").get<double>(), opt, seed));
    out.push_back(mc_edd_cell("6", "parallel" + tag, parallel, scenario, row.at("parallel").get<double>(), opt, seed));
  }
  return out;
}

std::vector<CellResult> table7(const json &t, const ReproduceOptions &opt) {
  std::vector<CellResult> out;
  const auto rows = t.at("rows_grid").get<std::size_t>();
  const auto cols = t.at("cols_grid").get<std::size_t>();
  const double spacing = t.at("spacing").get<double>();
  const double beta = t.at("beta").get<double>();
  const auto m0 = t.at("m0").get<std::int64_t>();
  const auto m1 = t.at("m1").get<std::int64_t>();
  const SensorGrid grid(rows, cols, spacing);
  const std::size_t n = grid.size();
  const auto model = ProfileModel::for_grid(grid, {beta});

  const auto &tail = t.at("tail");
  const double tail_m = tail.at("m").get<double>();
  const double printed_prob = tail.at("prob").get<double>();
  const double prob = profile_tail_prob(tail.at("b").get<double>(), beta, model.area(), m0, m1, tail_m);
  out.push_back(judged("7", "profile P{T<=" + fmt(tail_m) + "} b=" + fmt(tail.at("b").get<double>()), "theory", prob,
                       0.0, printed_prob, 0.02 * printed_prob));

  const auto &un = t.at("unstructured");
  const double un_p0 = un.at("p0").get<double>();
  const double un_b = un.at("b").get<double>();
  // threshold whose analytic ARL matches the profile rule's exponential tail target
  const double target_arl = -tail_m / std::log1p(-printed_prob);
  const double b_analytic = calibrate_threshold(rule_gspec(Rule::t2, un_p0, 1.0), n, target_arl, m0, m1);
  auto bcell = judged("7", "unstructured T2(" + fmt(un_p0) + ") analytic b", "threshold", b_analytic, 0.0, un_b,
                      0.02 * un_b);
  bcell.note = "target ARL " + fmt(target_arl, 5);
  out.push_back(std::move(bcell));
  if (opt.theory_only)
    return out;

  DetectorConfig prof = windowed(Rule::profile, 0.1, 1.0, t.at("profile").at("b").get<double>(), m0, m1);
  prof.profile = ProfileSettings{rows, cols, spacing, {beta}, 0.0};
  const auto cal = calibrate_empirical(prof, n, {static_cast<std::int64_t>(tail_m), printed_prob}, opt.trials,
                                       cell_seed(opt, 7, 900), opt.threads);
  out.push_back(judged("7", "profile b (empirical)", "threshold", cal.thresholds.at(0), 0.0, prof.b, 0.05 * prof.b));

  const auto unstructured = windowed(Rule::t2, un_p0, 1.0, un_b, m0, m1);
  std::uint64_t cell = 0;
  for (const auto &[r_text, printed] : t.at("profile").at("edd").items()) {
    const double r = std::stod(r_text);
    const Source source{r, Point{0.0, 0.0}};
    const Scenario scenario = Scenario::from_means(amplitude_field(std::span(&source, 1), grid, beta), 0);
    const auto seed = cell_seed(opt, 7, cell++);
    out.push_back(mc_edd_cell("7", "profile r=" + r_text, prof, scenario, printed.get<double>(), opt, seed));
    out.push_back(mc_edd_cell("7", "unstructured r=" + r_text, unstructured, scenario,
                              un.at("edd").at(r_text).get<double>(), opt, seed));
  }
  return out;
}

std::vector<CellResult> fig1(const json &t, const ReproduceOptions &opt) {
  std::vector<CellResult> out;
  const auto n = t.at("N").get<std::size_t>();
  const auto m0 = t.at("m0").get<std::int64_t>();
  const auto m1 = t.at("m1").get<std::int64_t>();
  const double p0 = t.at("p0").get<double>();
  const double b = t.at("b").get<double>();
  const auto g = rule_gspec(Rule::t2, p0, 1.0);
  const auto theory = arl_theorem1(g, n, b, m0, m1);
  out.push_back(judged("fig1", "theory ARL", "theory", theory.arl, 0.0, std::nullopt, 0.0));
  if (opt.theory_only)
    return out;

  TrialPlan plan;
  plan.detector = windowed(Rule::t2, p0, 1.0, b, m0, m1);
  plan.scenario = Scenario::null(n);
  plan.n_trials = opt.trials;
  plan.seed = cell_seed(opt, 8, 0);
  plan.mode = RunMode::full_run;
  plan.threads = opt.threads;
  const Estimate e = estimate_arl(plan);
  const auto report = exponentiality_report(e.times);
  out.push_back(judged("fig1", "mean stopping time", "mc", e.value, e.std_error, std::nullopt, 0.0));
  auto ks = judged("fig1", "KS modified statistic", "mc", report.ks_modified, 0.0, std::nullopt, 0.0);
  ks.pass = !report.rejected;
  ks.note = "1% critical value " + fmt(report.critical_1pct, 4);
  out.push_back(std::move(ks));
  for (const auto &pt : report.survival) {
    const double predicted = 1.0 - tail_prob_from_arl(theory.arl, pt.t).exponential;
    out.push_back(judged("fig1", "P{T > " + fmt(pt.t, 5) + "}", "mc", pt.empirical, 0.0, predicted, report.dkw_band));
  }
  return out;
}

} // namespace

const json &reference_tables() {
  static const json tables = json::parse(detail::kReferenceTablesJson);
  return tables;
}

std::vector<std::string> table_ids() { return {"1", "2", "3", "4", "5", "6", "7", "fig1"}; }

double sig_digit_tolerance(double reference, int digits) {
  if (reference == 0.0)
    return 0.0;
  const double exponent = std::floor(std::log10(std::abs(reference)));
  return 0.5 * std::pow(10.0, exponent - (digits - 1));
}

double printed_se(double sd, std::size_t trials) { return sd / std::sqrt(static_cast<double>(trials)); }

std::vector<CellResult> reproduce_table(std::string_view id, const ReproduceOptions &options) {
  if (options.trials < 2)
    throw ParameterError("reproduce needs at least two trials per cell");
  const auto &ref = reference_tables();
  if (id == "1")
    return arl_table("1", ref.at("table1"), Rule::t2, options);
  if (id == "2")
    return arl_table("2", ref.at("table2"), Rule::t4, options);
  if (id == "3")
    return table3(ref.at("table3"), options);
  if (id == "4")
    return table4(ref.at("table4"), options);
  if (id == "5")
    return table5(ref.at("table5"), ref.at("table4"), options);
  if (id == "6")
    return table6(ref.at("table6"), options);
  if (id == "7")
    return table7(ref.at("table7"), options);
  if (id == "fig1")
    return fig1(ref.at("fig1"), options);
  throw ParameterError("unknown table id '" + std::string(id) + "'; expected 1-7 or fig1");
}

} // namespace mixcpd
