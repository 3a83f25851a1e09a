#include "mixcpd/profile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mixcpd/errors.hpp"
#include "mixcpd/kernels.hpp"

namespace mixcpd {

SensorGrid::SensorGrid(std::size_t rows, std::size_t cols, double spacing)
    : rows_(rows), cols_(cols), spacing_(spacing) {
  if (rows == 0 || cols == 0)
    throw ParameterError("sensor grid must be nonempty");
  if (!(spacing > 0.0))
    throw ParameterError("sensor spacing must be positive");
}

double SensorGrid::col_coord(std::size_t c) const noexcept {
  return (static_cast<double>(c) - 0.5 * static_cast<double>(cols_ - 1)) * spacing_;
}

double SensorGrid::row_coord(std::size_t r) const noexcept {
  return (static_cast<double>(r) - 0.5 * static_cast<double>(rows_ - 1)) * spacing_;
}

Point SensorGrid::position(std::size_t n) const {
  if (n >= size())
    throw DimensionError("sensor index " + std::to_string(n) + " out of range");
  return {col_coord(n % cols_), row_coord(n / cols_)};
}

double SensorGrid::bounding_area() const noexcept {
  return static_cast<double>(cols_ - 1) * spacing_ * static_cast<double>(rows_ - 1) * spacing_;
}

double raw_profile(Point x, Point z, double beta) noexcept {
  const double dx = x.x - z.x;
  const double dy = x.y - z.y;
  return std::exp(-(dx * dx + dy * dy) / (4.0 * beta)) / std::sqrt(2.0 * std::numbers::pi * beta);
}

double raw_profile_norm(const SensorGrid &grid, Point z, double beta) {
  double ss = 0.0;
  for (std::size_t n = 0; n < grid.size(); ++n) {
    const double a = raw_profile(grid.position(n), z, beta);
    ss += a * a;
  }
  return std::sqrt(ss);
}

std::vector<double> profile_vector(const SensorGrid &grid, Point z, double beta) {
  if (!(beta > 0.0))
    throw ParameterError("profile beta must be positive");
  std::vector<double> v(grid.size());
  double ss = 0.0;
  for (std::size_t n = 0; n < v.size(); ++n) {
    v[n] = raw_profile(grid.position(n), z, beta);
    ss += v[n] * v[n];
  }
  const double norm = std::sqrt(ss);
  if (!(norm > 0.0))
    throw DomainError("profile vanishes on the grid; the source is too far from every sensor");
  for (double &x : v)
    x /= norm;
  return v;
}

std::vector<double> amplitude_field(std::span<const Source> sources, const SensorGrid &grid, double beta) {
  std::vector<double> mu(grid.size(), 0.0);
  for (const auto &s : sources) {
    if (s.r < 0.0)
      throw ParameterError("source strength must be nonnegative");
    if (s.r == 0.0)
      continue;
    const auto v = profile_vector(grid, s.z, beta);
    for (std::size_t n = 0; n < mu.size(); ++n)
      mu[n] += s.r * v[n];
  }
  return mu;
}

ProfileModel ProfileModel::for_grid(const SensorGrid &grid, std::vector<double> betas, double candidate_spacing) {
  ProfileModel m;
  m.betas = std::move(betas);
  m.candidate_spacing = candidate_spacing > 0.0 ? candidate_spacing : 0.5 * grid.spacing();
  m.x_min = grid.col_coord(0);
  m.x_max = grid.col_coord(grid.cols() - 1);
  m.y_min = grid.row_coord(0);
  m.y_max = grid.row_coord(grid.rows() - 1);
  m.validate();
  return m;
}

void ProfileModel::validate() const {
  if (betas.empty())
    throw ParameterError("profile model needs at least one beta");
  for (double b : betas)
    if (!(b > 0.0))
      throw ParameterError("profile beta must be positive");
  if (!(candidate_spacing > 0.0))
    throw ParameterError("candidate spacing must be positive");
  if (x_max < x_min || y_max < y_min)
    throw ParameterError("profile region is empty");
}

namespace {

std::vector<double> lattice(double lo, double hi, double h) {
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / h + 1e-9)) + 1;
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i)
    v[i] = lo + h * static_cast<double>(i);
  return v;
}

} // namespace

std::vector<double> ProfileModel::candidate_xs() const { return lattice(x_min, x_max, candidate_spacing); }
std::vector<double> ProfileModel::candidate_ys() const { return lattice(y_min, y_max, candidate_spacing); }

std::vector<Point> ProfileModel::candidates() const {
  const auto xs = candidate_xs();
  const auto ys = candidate_ys();
  std::vector<Point> out;
  out.reserve(xs.size() * ys.size());
  for (double y : ys)
    for (double x : xs)
      out.push_back({x, y});
  return out;
}

ProfileScore profile_score(const StreamState &state, std::int64_t k, const ProfileModel &model,
                           const SensorGrid &grid) {
  model.validate();
  if (state.n_streams() != grid.size())
    throw DimensionError("stream count differs from the sensor grid size");
  std::vector<double> u(grid.size());
  for (std::size_t n = 0; n < u.size(); ++n)
    u[n] = u_stat(state, k, n);
  const auto cands = model.candidates();
  ProfileScore best{-1.0, 0, 0};
  for (std::size_t bi = 0; bi < model.betas.size(); ++bi) {
    for (std::size_t zi = 0; zi < cands.size(); ++zi) {
      const auto a = profile_vector(grid, cands[zi], model.betas[bi]);
      double proj = 0.0;
      for (std::size_t n = 0; n < u.size(); ++n)
        proj += a[n] * u[n];
      const double p = std::max(proj, 0.0);
      const double s = 0.5 * p * p;
      if (s > best.score)
        best = {s, zi, bi};
    }
  }
  return best;
}

ProfileBank::ProfileBank(const SensorGrid &grid, const ProfileModel &model, double beta)
    : rows_(grid.rows()), cols_(grid.cols()) {
  const auto xs = model.candidate_xs();
  const auto ys = model.candidate_ys();
  nx_ = xs.size();
  ny_ = ys.size();
  // the Gaussian factorizes, so the 2-D unit-norm profile is the product of 1-D unit-norm profiles
  const auto fill = [beta](std::vector<double> &a, const std::vector<double> &centers, std::size_t count,
                           auto coord) {
    a.assign(centers.size() * count, 0.0);
    for (std::size_t i = 0; i < centers.size(); ++i) {
      double ss = 0.0;
      for (std::size_t j = 0; j < count; ++j) {
        const double d = coord(j) - centers[i];
        const double v = std::exp(-d * d / (4.0 * beta));
        a[i * count + j] = v;
        ss += v * v;
      }
      const double norm = std::sqrt(ss);
      if (!(norm > 0.0))
        throw DomainError("profile vanishes on the grid for a candidate location");
      for (std::size_t j = 0; j < count; ++j)
        a[i * count + j] /= norm;
    }
  };
  fill(ax_, xs, cols_, [&grid](std::size_t c) { return grid.col_coord(c); });
  fill(ay_, ys, rows_, [&grid](std::size_t r) { return grid.row_coord(r); });
  tmp_.resize(rows_ * nx_);
}

void ProfileBank::project(const double *field, double *out) const {
  for (std::size_t r = 0; r < rows_; ++r) {
    const double *yr = field + r * cols_;
    for (std::size_t ix = 0; ix < nx_; ++ix) {
      const double *a = ax_.data() + ix * cols_;
      double s = 0.0;
      for (std::size_t c = 0; c < cols_; ++c)
        s += yr[c] * a[c];
      tmp_[r * nx_ + ix] = s;
    }
  }
  std::fill(out, out + nx_ * ny_, 0.0);
  for (std::size_t iy = 0; iy < ny_; ++iy) {
    double *o = out + iy * nx_;
    for (std::size_t r = 0; r < rows_; ++r) {
      const double a = ay_[iy * rows_ + r];
      const double *t = tmp_.data() + r * nx_;
      for (std::size_t ix = 0; ix < nx_; ++ix)
        o[ix] += a * t[ix];
    }
  }
}

double profile_arl(double b, double beta, double area, std::int64_t m0, std::int64_t m1, NuMethod method) {
  if (!(b > 0.0))
    throw DomainError("profile ARL needs b > 0");
  if (!(beta > 0.0) || !(area > 0.0))
    throw ParameterError("profile ARL needs beta > 0 and a region of positive area");
  if (m0 < 1 || m1 <= m0)
    throw WindowError("profile ARL needs 1 <= m0 < m1");
  const double integral = nu_integral(std::sqrt(b / static_cast<double>(m1)), std::sqrt(b / static_cast<double>(m0)),
                                      method);
  const double pi = std::numbers::pi;
  const double log_arl = std::log(16.0 * std::sqrt(2.0 * pi * pi * pi) * beta * beta) - 1.5 * std::log(b) + 0.5 * b -
                         std::log(integral * area);
  return std::exp(log_arl);
}

double profile_tail_prob(double b, double beta, double area, std::int64_t m0, std::int64_t m1, double m,
                         NuMethod method) {
  if (m <= 0.0)
    return 0.0;
  return std::min(1.0, m / profile_arl(b, beta, area, m0, m1, method));
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Matched-filter rule [(sum_n alpha_z(x_n) U_n)+]^2 >= b, maximized over z, beta and the window.
/// Projections of every prefix-sum column are kept in a ring, so each step projects once and the
/// window scan is a max over candidates of the projected differences.
class ProfileDetector final : public Detector {
public:
  ProfileDetector(DetectorConfig config, std::size_t n_streams)
      : Detector(std::move(config)),
        grid_(config_.profile->rows, config_.profile->cols, config_.profile->spacing),
        model_(ProfileModel::for_grid(grid_, config_.profile->betas, config_.profile->candidate_spacing)),
        state_(n_streams, static_cast<std::size_t>(config_.m1)), slots_(static_cast<std::size_t>(config_.m1) + 1) {
    if (n_streams != grid_.size())
      throw DimensionError("profile grid has " + std::to_string(grid_.size()) + " sensors, data has " +
                           std::to_string(n_streams) + " streams");
    for (double beta : model_.betas)
      banks_.emplace_back(grid_, model_, beta);
    n_cand_ = banks_.front().n_candidates();
    ring_.assign(banks_.size() * slots_ * n_cand_, 0.0);
    params_ = simd::TermParams::make(simd::Transform::glr_max, 1.0);
  }

  Decision step(std::span<const double> y) override {
    state_.push(y);
    const std::int64_t t = state_.time();
    project_column(t);
    const auto &ks = simd::kernels();
    Decision d;
    d.stop_time = t;
    d.threshold = config_.b;
    const std::int64_t w_hi = std::min(t, config_.m1);
    std::int64_t best_w = -1;
    std::size_t best_beta = 0;
    double best = kNegInf;
    for (std::int64_t w = config_.m0; w <= w_hi; ++w) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(w));
      for (std::size_t bi = 0; bi < banks_.size(); ++bi) {
        // 2 * max_z (1/2)(u+)^2 = max_z (u+)^2
        const double s = 2.0 * ks.reduce_window(params_, column(bi, t), column(bi, t - w), n_cand_, scale, 0.0);
        if (s > best) {
          best = s;
          best_w = w;
          best_beta = bi;
        }
      }
    }
    if (best_w < 0)
      return d;
    d.score = best;
    d.argmax_k = t - best_w;
    d.argmax_z = argmax_candidate(best_beta, t, best_w);
    d.stopped = best >= config_.b;
    last_k_ = d.argmax_k;
    last_beta_ = best_beta;
    last_z_ = *d.argmax_z;
    return d;
  }

  std::int64_t time() const noexcept override { return state_.time(); }
  std::size_t n_streams() const noexcept override { return state_.n_streams(); }

  std::vector<double> contributions() const override {
    const std::int64_t t = state_.time();
    if (last_k_ < 0 || last_k_ >= t || !state_.addressable(last_k_))
      return {};
    const auto a = profile_vector(grid_, model_.candidates()[last_z_], model_.betas[last_beta_]);
    std::vector<double> out(a.size());
    for (std::size_t n = 0; n < a.size(); ++n)
      out[n] = a[n] * u_stat(state_, last_k_, n);
    return out;
  }

  nlohmann::json snapshot() const override {
    return {{"config", to_json(config_)},
            {"n_streams", state_.n_streams()},
            {"state", state_.snapshot()},
            {"last_k", last_k_},
            {"last_beta", last_beta_},
            {"last_z", last_z_}};
  }

  void restore(const nlohmann::json &snap) {
    state_ = StreamState::restore(snap.at("state"));
    last_k_ = snap.at("last_k").get<std::int64_t>();
    last_beta_ = snap.at("last_beta").get<std::size_t>();
    last_z_ = snap.at("last_z").get<std::size_t>();
    std::fill(ring_.begin(), ring_.end(), 0.0);
    for (std::int64_t j = state_.oldest(); j <= state_.time(); ++j)
      project_column(j);
  }

private:
  double *column(std::size_t bank, std::int64_t j) {
    const auto slot = static_cast<std::size_t>(j % static_cast<std::int64_t>(slots_));
    return ring_.data() + (bank * slots_ + slot) * n_cand_;
  }

  void project_column(std::int64_t j) {
    const double *s = state_.row(j);
    for (std::size_t bi = 0; bi < banks_.size(); ++bi)
      banks_[bi].project(s, column(bi, j));
  }

  std::size_t argmax_candidate(std::size_t bank, std::int64_t t, std::int64_t w) {
    const double *head = column(bank, t);
    const double *tail = column(bank, t - w);
    std::size_t best = 0;
    double best_v = kNegInf;
    for (std::size_t z = 0; z < n_cand_; ++z) {
      const double v = head[z] - tail[z];
      if (v > best_v) {
        best_v = v;
        best = z;
      }
    }
    return best;
  }

  SensorGrid grid_;
  ProfileModel model_;
  StreamState state_;
  std::size_t slots_;
  std::vector<ProfileBank> banks_;
  std::size_t n_cand_ = 0;
  std::vector<double> ring_;
  simd::TermParams params_;
  std::int64_t last_k_ = -1;
  std::size_t last_beta_ = 0;
  std::size_t last_z_ = 0;
};

} // namespace

std::unique_ptr<Detector> make_profile_detector(const DetectorConfig &config, std::size_t n_streams) {
  config.validate();
  if (config.rule != Rule::profile)
    throw ParameterError("not a profile rule configuration");
  return std::make_unique<ProfileDetector>(config, n_streams);
}

void restore_profile_detector(Detector &detector, const nlohmann::json &snapshot) {
  auto *p = dynamic_cast<ProfileDetector *>(&detector);
  if (p == nullptr)
    throw ParameterError("snapshot does not belong to a profile detector");
  p->restore(snapshot);
}

} // namespace mixcpd
