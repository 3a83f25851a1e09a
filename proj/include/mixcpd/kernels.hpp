#pragma once

#include <cstddef>
#include <string_view>

namespace mixcpd::simd {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);
Isa parse_isa(std::string_view name);

/// Per-element term applied to v = scale * (head[i] - tail[i]) + offset.
enum class Transform {
  glr_mixture,   ///< log(1 - p0 + p0 e^x), x = (v+)^2 / 2
  glr_hard,      ///< [x + log p0]+,        x = (v+)^2 / 2
  glr_square,    ///< x = (v+)^2 / 2
  glr_max,       ///< x = (v+)^2 / 2, reduced by max instead of sum
  fixed_mixture, ///< log(1 - p0 + p0 e^{v+})
  fixed_hard,    ///< [v + log p0]+
  linear,        ///< v
};

struct TermParams {
  Transform transform = Transform::glr_square;
  double p0 = 1.0;
  double log_p0 = 0.0;

  static TermParams make(Transform transform, double p0);
};

/// Sum (max for glr_max) over i < n of term(scale * (head[i] - tail[i]) + offset).
/// Returns 0 for n == 0 (max of an empty set of nonnegative terms).
using ReduceWindowFn = double (*)(const TermParams &params, const double *head, const double *tail, std::size_t n,
                                  double scale, double offset);
/// Elementwise out[i] = exp(x[i]) / log(x[i]); used by the kernels and exposed for equivalence tests.
using BlockFn = void (*)(const double *x, double *out, std::size_t n);

struct KernelSet {
  Isa isa;
  ReduceWindowFn reduce_window;
  BlockFn exp_block;
  BlockFn log_block;
};

bool isa_supported(Isa isa) noexcept;
/// Best ISA supported by this CPU and build.
Isa detected_isa() noexcept;

/// Kernels currently selected for all detectors. Initialized to detected_isa(),
/// overridable by the MIXCPD_ISA environment variable (scalar|avx2) or set_active_isa.
const KernelSet &kernels() noexcept;
const KernelSet &kernels_for(Isa isa);
Isa active_isa() noexcept;
void set_active_isa(Isa isa);

namespace scalar {
double reduce_window(const TermParams &params, const double *head, const double *tail, std::size_t n, double scale,
                     double offset);
void exp_block(const double *x, double *out, std::size_t n);
void log_block(const double *x, double *out, std::size_t n);
} // namespace scalar

#if defined(MIXCPD_HAVE_AVX2)
namespace avx2 {
double reduce_window(const TermParams &params, const double *head, const double *tail, std::size_t n, double scale,
                     double offset);
void exp_block(const double *x, double *out, std::size_t n);
void log_block(const double *x, double *out, std::size_t n);
} // namespace avx2
#endif

} // namespace mixcpd::simd
