#include "mixcpd/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "mixcpd/errors.hpp"

namespace mixcpd {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char *expected) {
  throw ParameterError(std::string(key) + ": '" + std::string(value) + "' is not " + expected);
}

double to_double(std::string_view key, std::string_view v) {
  v = trim(v);
  double out = 0.0;
  const char *first = v.data();
  if (!v.empty() && v.front() == '+')
    ++first;
  const auto [ptr, ec] = std::from_chars(first, v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || std::isnan(out))
    bad_value(key, v, "a number");
  return out;
}

template <typename Int> Int to_int(std::string_view key, std::string_view v) {
  v = trim(v);
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    bad_value(key, v, "an integer in range");
  return out;
}

std::vector<double> to_doubles(std::string_view key, std::string_view v) {
  std::vector<double> out;
  if (trim(v).empty())
    return out;
  for (auto part : split(v, ','))
    out.push_back(to_double(key, part));
  return out;
}

std::vector<std::size_t> to_indices(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  if (trim(v).empty())
    return out;
  for (auto part : split(v, ','))
    out.push_back(to_int<std::size_t>(key, part));
  return out;
}

std::string join_doubles(const std::vector<double> &xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i)
    out += (i ? "," : "") + format_double(xs[i]);
  return out;
}

std::string join_indices(const std::vector<std::size_t> &xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i)
    out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

std::vector<ComponentConfig> to_components(std::string_view key, std::string_view v) {
  std::vector<ComponentConfig> out;
  if (trim(v).empty())
    return out;
  for (auto item : split(v, ';')) {
    const auto parts = split(item, ':');
    if (parts.size() != 3 && parts.size() != 4)
      bad_value(key, item, "of the form rule:p0:b[:delta]");
    ComponentConfig c;
    c.rule = parse_rule(parts[0]);
    c.p0 = to_double(key, parts[1]);
    c.b = to_double(key, parts[2]);
    if (parts.size() == 4)
      c.delta = to_double(key, parts[3]);
    out.push_back(c);
  }
  return out;
}

std::string join_components(const std::vector<ComponentConfig> &cs) {
  std::string out;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const auto &c = cs[i];
    out += (i ? ";" : "") + std::string(to_string(c.rule)) + ":" + format_double(c.p0) + ":" + format_double(c.b) +
           ":" + format_double(c.delta);
  }
  return out;
}

SimMode to_sim_mode(std::string_view key, std::string_view v) {
  if (v == "arl")
    return SimMode::arl;
  if (v == "edd")
    return SimMode::edd;
  bad_value(key, v, "arl or edd");
}

RunMode to_run_mode(std::string_view key, std::string_view v) {
  if (v == "full" || v == "full_run")
    return RunMode::full_run;
  if (v == "shortcut" || v == "tail_shortcut")
    return RunMode::tail_shortcut;
  bad_value(key, v, "full or shortcut");
}

DelayCount to_count(std::string_view key, std::string_view v) {
  if (v == "inclusive")
    return DelayCount::inclusive;
  if (v == "stopping_time")
    return DelayCount::stopping_time;
  bad_value(key, v, "inclusive or stopping_time");
}

OutputFormat to_format(std::string_view key, std::string_view v) {
  if (v == "text")
    return OutputFormat::text;
  if (v == "jsonl")
    return OutputFormat::jsonl;
  bad_value(key, v, "text or jsonl");
}

struct Field {
  const char *key;
  std::function<void(RunConfig &, std::string_view)> set;
  std::function<std::optional<std::string>(const RunConfig &)> get;
};

template <typename T> std::optional<std::string> opt_double(const std::optional<T> &v) {
  if (!v)
    return std::nullopt;
  return format_double(static_cast<double>(*v));
}

template <typename T> std::optional<std::string> opt_int(const std::optional<T> &v) {
  if (!v)
    return std::nullopt;
  return std::to_string(*v);
}

const std::vector<Field> &fields() {
  using S = std::optional<std::string>;
  static const std::vector<Field> table = {
      {"rule", [](RunConfig &c, std::string_view v) { c.rule = parse_rule(v); },
       [](const RunConfig &c) -> S { return std::string(to_string(c.rule)); }},
      {"N", [](RunConfig &c, std::string_view v) { c.N = to_int<std::size_t>("N", v); },
       [](const RunConfig &c) -> S { return std::to_string(c.N); }},
      {"p0", [](RunConfig &c, std::string_view v) { c.p0 = to_double("p0", v); },
       [](const RunConfig &c) -> S { return format_double(c.p0); }},
      {"delta", [](RunConfig &c, std::string_view v) { c.delta = to_double("delta", v); },
       [](const RunConfig &c) -> S { return format_double(c.delta); }},
      {"b", [](RunConfig &c, std::string_view v) { c.b = to_double("b", v); },
       [](const RunConfig &c) -> S { return format_double(c.b); }},
      {"m0", [](RunConfig &c, std::string_view v) { c.m0 = to_int<std::int64_t>("m0", v); },
       [](const RunConfig &c) -> S { return std::to_string(c.m0); }},
      {"m1", [](RunConfig &c, std::string_view v) { c.m1 = to_int<std::int64_t>("m1", v); },
       [](const RunConfig &c) -> S { return std::to_string(c.m1); }},
      {"components", [](RunConfig &c, std::string_view v) { c.components = to_components("components", v); },
       [](const RunConfig &c) -> S {
         if (c.components.empty())
           return std::nullopt;
         return join_components(c.components);
       }},
      {"target_arl", [](RunConfig &c, std::string_view v) { c.target_arl = to_double("target_arl", v); },
       [](const RunConfig &c) -> S { return opt_double(c.target_arl); }},
      {"tail_m", [](RunConfig &c, std::string_view v) { c.tail_m = to_int<std::int64_t>("tail_m", v); },
       [](const RunConfig &c) -> S { return opt_int(c.tail_m); }},
      {"alpha", [](RunConfig &c, std::string_view v) { c.alpha = to_double("alpha", v); },
       [](const RunConfig &c) -> S { return opt_double(c.alpha); }},
      {"kappa", [](RunConfig &c, std::string_view v) { c.kappa = to_int<std::int64_t>("kappa", v); },
       [](const RunConfig &c) -> S { return std::to_string(c.kappa); }},
      {"affected", [](RunConfig &c, std::string_view v) { c.affected = to_int<std::size_t>("affected", v); },
       [](const RunConfig &c) -> S { return opt_int(c.affected); }},
      {"affected_list", [](RunConfig &c, std::string_view v) { c.affected_list = to_indices("affected_list", v); },
       [](const RunConfig &c) -> S {
         if (c.affected_list.empty())
           return std::nullopt;
         return join_indices(c.affected_list);
       }},
      {"mu", [](RunConfig &c, std::string_view v) { c.mu = to_double("mu", v); },
       [](const RunConfig &c) -> S { return format_double(c.mu); }},
      {"trials", [](RunConfig &c, std::string_view v) { c.trials = to_int<std::size_t>("trials", v); },
       [](const RunConfig &c) -> S { return std::to_string(c.trials); }},
      {"horizon", [](RunConfig &c, std::string_view v) { c.horizon = to_int<std::int64_t>("horizon", v); },
       [](const RunConfig &c) -> S { return std::to_string(c.horizon); }},
      {"cap", [](RunConfig &c, std::string_view v) { c.cap = to_int<std::int64_t>("cap", v); },
       [](const RunConfig &c) -> S { return std::to_string(c.cap); }},
      {"seed", [](RunConfig &c, std::string_view v) { c.seed = to_int<std::uint64_t>("seed", v); },
       [](const RunConfig &c) -> S { return std::to_string(c.seed); }},
      {"mode", [](RunConfig &c, std::string_view v) { c.mode = to_sim_mode("mode", v); },
       [](const RunConfig &c) -> S { return std::string(to_string(c.mode)); }},
      {"run_mode", [](RunConfig &c, std::string_view v) { c.run_mode = to_run_mode("run_mode", v); },
       [](const RunConfig &c) -> S { return std::string(to_string(c.run_mode)); }},
      {"count", [](RunConfig &c, std::string_view v) { c.count = to_count("count", v); },
       [](const RunConfig &c) -> S { return std::string(to_string(c.count)); }},
      {"threads", [](RunConfig &c, std::string_view v) { c.threads = to_int<unsigned>("threads", v); },
       [](const RunConfig &c) -> S { return std::to_string(c.threads); }},
      {"rows", [](RunConfig &c, std::string_view v) { c.rows = to_int<std::size_t>("rows", v); },
       [](const RunConfig &c) -> S { return std::to_string(c.rows); }},
      {"cols", [](RunConfig &c, std::string_view v) { c.cols = to_int<std::size_t>("cols", v); },
       [](const RunConfig &c) -> S { return std::to_string(c.cols); }},
      {"spacing", [](RunConfig &c, std::string_view v) { c.spacing = to_double("spacing", v); },
       [](const RunConfig &c) -> S { return format_double(c.spacing); }},
      {"betas", [](RunConfig &c, std::string_view v) { c.betas = to_doubles("betas", v); },
       [](const RunConfig &c) -> S { return join_doubles(c.betas); }},
      {"candidate_spacing",
       [](RunConfig &c, std::string_view v) { c.candidate_spacing = to_double("candidate_spacing", v); },
       [](const RunConfig &c) -> S { return format_double(c.candidate_spacing); }},
      {"output", [](RunConfig &c, std::string_view v) { c.output = std::string(v); },
       [](const RunConfig &c) -> S {
         if (c.output.empty())
           return std::nullopt;
         return c.output;
       }},
      {"format", [](RunConfig &c, std::string_view v) { c.format = to_format("format", v); },
       [](const RunConfig &c) -> S { return std::string(to_string(c.format)); }},
  };
  return table;
}

const Field *find_field(std::string_view key) {
  for (const auto &f : fields())
    if (key == f.key)
      return &f;
  return nullptr;
}

} // namespace

std::string format_double(double v) {
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string_view to_string(SimMode mode) { return mode == SimMode::arl ? "arl" : "edd"; }
std::string_view to_string(RunMode mode) { return mode == RunMode::full_run ? "full" : "shortcut"; }
std::string_view to_string(DelayCount count) {
  return count == DelayCount::inclusive ? "inclusive" : "stopping_time";
}
std::string_view to_string(OutputFormat format) { return format == OutputFormat::text ? "text" : "jsonl"; }

const std::vector<std::string> &RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto &f : fields())
      out.emplace_back(f.key);
    return out;
  }();
  return names;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const Field *f = find_field(key);
  if (!f)
    throw ParameterError("unknown config key '" + std::string(key) + "'");
  f->set(*this, trim(value));
}

std::string RunConfig::get(std::string_view key) const {
  const Field *f = find_field(key);
  if (!f)
    throw ParameterError("unknown config key '" + std::string(key) + "'");
  return f->get(*this).value_or("");
}

bool RunConfig::has(std::string_view key) const {
  const Field *f = find_field(key);
  return f && f->get(*this).has_value();
}

RunConfig RunConfig::parse(std::string_view text) {
  RunConfig c;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find('\n', start), text.size());
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    if (trim(line).empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("expected key = value", line_no, line.find_first_not_of(" \t") + 1);
    const auto key = trim(line.substr(0, eq));
    if (!find_field(key))
      throw ParseError("unknown config key '" + std::string(key) + "'", line_no,
                       line.find_first_not_of(" \t") + 1);
    try {
      c.set(key, line.substr(eq + 1));
    } catch (const ParameterError &e) {
      throw ParseError(e.what(), line_no, eq + 2);
    }
  }
  return c;
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto &f : fields())
    if (const auto v = f.get(*this))
      out += std::string(f.key) + " = " + *v + "\n";
  return out;
}

std::uint64_t RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string RunConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

DetectorConfig RunConfig::detector_config() const {
  DetectorConfig d;
  d.rule = rule;
  d.p0 = p0;
  d.delta = delta;
  d.b = b;
  d.m0 = m0;
  d.m1 = m1;
  d.components = components;
  if (rule == Rule::profile)
    d.profile = ProfileSettings{rows, cols, spacing, betas, candidate_spacing};
  return d;
}

Scenario RunConfig::scenario() const {
  if (!affected_list.empty()) {
    Scenario s;
    s.n_streams = N;
    s.change_point = kappa;
    s.affected = affected_list;
    s.means.assign(affected_list.size(), mu);
    s.seed = seed;
    return s;
  }
  if (affected && *affected > 0)
    return Scenario::leading(N, *affected, mu, kappa, seed);
  return Scenario::null(N, seed);
}

void RunConfig::validate() const {
  if (N == 0)
    throw ParameterError("N must be at least 1");
  detector_config().validate();
  if (rule == Rule::profile && rows * cols != N)
    throw DimensionError("profile grid rows x cols must equal N");
  if (target_arl && !(*target_arl > 1.0 && std::isfinite(*target_arl)))
    throw ParameterError("target_arl must be a finite number above 1");
  if (tail_m && *tail_m < 1)
    throw ParameterError("tail_m must be positive");
  if (alpha && !(*alpha > 0.0 && *alpha < 1.0))
    throw ParameterError("alpha must lie in (0, 1)");
  if (kappa < 0)
    throw ParameterError("kappa must be nonnegative");
  if (affected && *affected > N)
    throw ParameterError("affected count exceeds N");
  if (affected && !affected_list.empty())
    throw ParameterError("give either affected or affected_list, not both");
  if (!std::isfinite(mu))
    throw ParameterError("mu must be finite");
  if (trials == 0)
    throw ParameterError("trials must be at least 1");
  if (horizon < 0 || cap < 0)
    throw ParameterError("horizon and cap must be nonnegative");
  scenario().validate();
}

} // namespace mixcpd
