#include "mixcpd/quadrature.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdint>
#include <string>

#include "mixcpd/errors.hpp"

namespace mixcpd {

QuadResult integrate(const std::function<double(double)> &f, double a, double b, const QuadOptions &opt) {
  if (a == b)
    return {};
  if (!std::isfinite(a) || !std::isfinite(b))
    throw DomainError("integration limits must be finite");
  double error = 0.0;
  double l1 = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, opt.max_depth, opt.rel_tol, &error, &l1);
  if (!std::isfinite(value))
    throw ConvergenceError("integrand produced a non-finite value on [" + std::to_string(a) + ", " +
                           std::to_string(b) + "]");
  return {value, error};
}

QuadResult integrate_pieces(const std::function<double(double)> &f, std::span<const double> breaks,
                            const QuadOptions &opt) {
  QuadResult total;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    if (!(breaks[i + 1] > breaks[i]))
      continue;
    const QuadResult r = integrate(f, breaks[i], breaks[i + 1], opt);
    total.value += r.value;
    total.error += r.error;
  }
  return total;
}

double solve_bracketed(const std::function<double(double)> &f, double lo, double hi, double rel_tol,
                       unsigned max_iter) {
  const double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0)
    return lo;
  if (fhi == 0.0)
    return hi;
  if ((flo < 0.0) == (fhi < 0.0))
    throw ConvergenceError("no sign change on [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  std::uintmax_t iters = max_iter;
  auto tol = [rel_tol](double a, double b) { return std::fabs(b - a) <= rel_tol * std::max(std::fabs(a), std::fabs(b)); };
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  if (iters >= max_iter)
    throw ConvergenceError("root finder did not converge in " + std::to_string(max_iter) + " iterations");
  return 0.5 * (a + b);
}

} // namespace mixcpd
