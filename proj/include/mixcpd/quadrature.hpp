#pragma once

#include <functional>
#include <span>

namespace mixcpd {

struct QuadOptions {
  double rel_tol = 1e-10;
  double abs_floor = 1e-14;
  unsigned max_depth = 20;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive Gauss-Kronrod (15 points) on [a, b]; a > b integrates with the sign flipped.
QuadResult integrate(const std::function<double(double)> &f, double a, double b, const QuadOptions &opt = {});

/// Sum of integrals over consecutive breakpoints; breaks must be sorted ascending.
QuadResult integrate_pieces(const std::function<double(double)> &f, std::span<const double> breaks,
                            const QuadOptions &opt = {});

/// Root of a function with a sign change on [lo, hi] (TOMS 748), to relative width rel_tol.
/// Throws ConvergenceError without a sign change or after max_iter iterations.
double solve_bracketed(const std::function<double(double)> &f, double lo, double hi, double rel_tol = 1e-12,
                       unsigned max_iter = 200);

} // namespace mixcpd
