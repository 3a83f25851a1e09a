#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "mixcpd/detector.hpp"
#include "mixcpd/special.hpp"
#include "mixcpd/stream_state.hpp"

namespace mixcpd {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Equi-spaced rows x cols sensor grid centred at the origin. Sensor n = r * cols + c sits at
/// ((c - (cols-1)/2) h, (r - (rows-1)/2) h).
class SensorGrid {
public:
  SensorGrid(std::size_t rows, std::size_t cols, double spacing);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double spacing() const noexcept { return spacing_; }
  std::size_t size() const noexcept { return rows_ * cols_; }
  Point position(std::size_t n) const;
  double col_coord(std::size_t c) const noexcept;
  double row_coord(std::size_t r) const noexcept;
  /// Area of the rectangle spanned by the sensors, ((cols-1) h) x ((rows-1) h).
  double bounding_area() const noexcept;

private:
  std::size_t rows_;
  std::size_t cols_;
  double spacing_;
};

/// Unnormalized Gaussian profile (2 pi beta)^{-1/2} exp(-|x - z|^2 / (4 beta)).
double raw_profile(Point x, Point z, double beta) noexcept;

/// alpha_z over the sensors, renormalized to unit Euclidean norm.
std::vector<double> profile_vector(const SensorGrid &grid, Point z, double beta);

/// Euclidean norm of the unnormalized profile over the sensors (1 in the continuum limit).
double raw_profile_norm(const SensorGrid &grid, Point z, double beta);

struct Source {
  double r = 0.0;
  Point z;
};

/// mu_n = sum_m r_m alpha_{z_m}(x_n) with unit-normalized profiles.
std::vector<double> amplitude_field(std::span<const Source> sources, const SensorGrid &grid, double beta);

/// Candidate source lattice and decay parameters.
struct ProfileModel {
  std::vector<double> betas{1.0};
  double candidate_spacing = 0.5;
  /// Region D for the candidate lattice and the ARL formula: [x_min, x_max] x [y_min, y_max].
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;

  /// Region = sensor bounding box, candidate spacing = half the sensor spacing.
  static ProfileModel for_grid(const SensorGrid &grid, std::vector<double> betas = {1.0},
                               double candidate_spacing = 0.0);
  double area() const noexcept { return (x_max - x_min) * (y_max - y_min); }
  std::vector<double> candidate_xs() const;
  std::vector<double> candidate_ys() const;
  /// Candidates in row-major order over (y, x): index = iy * nx + ix.
  std::vector<Point> candidates() const;
  void validate() const;
};

struct ProfileScore {
  double score = 0.0;   ///< max over z (and beta) of 1/2 [(sum_n alpha_z(x_n) U_n)+]^2
  std::size_t z = 0;    ///< maximizing candidate index
  std::size_t beta = 0; ///< maximizing beta index
};

/// Dense evaluation at change-point candidate k (reference path, O(N x candidates)).
ProfileScore profile_score(const StreamState &state, std::int64_t k, const ProfileModel &model,
                           const SensorGrid &grid);

/// Separable projection onto all candidate profiles for one beta:
/// P[iy, ix] = sum_{r, c} A_y[iy, r] Y[r, c] A_x[ix, c], where A_x, A_y hold 1-D normalized profiles.
class ProfileBank {
public:
  ProfileBank(const SensorGrid &grid, const ProfileModel &model, double beta);

  std::size_t n_candidates() const noexcept { return nx_ * ny_; }
  /// Writes the projections of one sensor field (row-major rows x cols) into out[n_candidates].
  void project(const double *field, double *out) const;

private:
  std::size_t rows_, cols_, nx_, ny_;
  std::vector<double> ax_; // nx x cols
  std::vector<double> ay_; // ny x rows
  mutable std::vector<double> tmp_;
};

/// ARL of the profile rule [(sum alpha_z U)+]^2 >= b:
/// 16 (2 pi^3)^{1/2} beta^2 b^{-3/2} e^{b/2} / (|D| int_{sqrt(b/m1)}^{sqrt(b/m0)} u nu^2(u) du).
double profile_arl(double b, double beta, double area, std::int64_t m0, std::int64_t m1,
                   NuMethod method = NuMethod::series);

/// m exp(-b/2) (b / 4 pi)^{3/2} 2^{1/2} |D| int u nu^2(u) du / (4 beta^2), i.e. m / profile_arl.
double profile_tail_prob(double b, double beta, double area, std::int64_t m0, std::int64_t m1, double m,
                         NuMethod method = NuMethod::series);

/// Profile detector for config.rule == Rule::profile; n_streams must equal rows * cols.
std::unique_ptr<Detector> make_profile_detector(const DetectorConfig &config, std::size_t n_streams);
void restore_profile_detector(Detector &detector, const nlohmann::json &snapshot);

} // namespace mixcpd
