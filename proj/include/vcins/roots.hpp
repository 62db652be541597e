#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <tuple>
#include <utility>

#include <boost/math/policies/policy.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "vcins/errors.hpp"

// Thin wrappers over Boost.Math's bracketing solvers. Errors surface as
// vcins exceptions instead of Boost's evaluation_error.
namespace vcins::roots {

using NoThrowPolicy = boost::math::policies::policy<
    boost::math::policies::evaluation_error<boost::math::policies::ignore_error>,
    boost::math::policies::domain_error<boost::math::policies::ignore_error>>;

struct Bracketed {
  double lo = 0.0;
  double hi = 0.0;
  double f_lo = 0.0;
  double f_hi = 0.0;
  std::uintmax_t iterations = 0;

  /// Endpoint with the smaller residual.
  double best() const { return std::abs(f_lo) <= std::abs(f_hi) ? lo : hi; }
  double best_residual() const { return std::min(std::abs(f_lo), std::abs(f_hi)); }
};

/// Largest point where a monotone predicate still holds, given pred(lo) true
/// and pred(hi) false. Plain bisection until hi - lo <= abs_tol.
template <class Pred>
double bisect_sup(Pred&& pred, double lo, double hi, double abs_tol, int max_iter = 400) {
  for (int i = 0; i < max_iter && hi - lo > abs_tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (pred(mid)) lo = mid;
    else hi = mid;
  }
  return lo;
}

/// Smallest point where a monotone predicate holds, given pred(lo) false and
/// pred(hi) true.
template <class Pred>
double bisect_inf(Pred&& pred, double lo, double hi, double abs_tol, int max_iter = 400) {
  for (int i = 0; i < max_iter && hi - lo > abs_tol; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (pred(mid)) hi = mid;
    else lo = mid;
  }
  return hi;
}

/// Root of f on [lo, hi] with f(lo), f(hi) of opposite sign (TOMS 748).
/// Stops when the bracket is below rel_tol relative width or f hits zero;
/// scale_floor keeps the width test meaningful for roots near zero.
template <class F>
Bracketed solve_bracketed(F&& f, double lo, double hi, double f_lo, double f_hi, double rel_tol,
                          std::uintmax_t max_iter = 200, double scale_floor = 0.0) {
  if (f_lo == 0.0) return {lo, lo, 0.0, 0.0, 0};
  if (f_hi == 0.0) return {hi, hi, 0.0, 0.0, 0};
  if ((f_lo > 0.0) == (f_hi > 0.0))
    throw SolverError("root not bracketed on [" + std::to_string(lo) + ", " + std::to_string(hi) +
                          "]: f = " + std::to_string(f_lo) + ", " + std::to_string(f_hi),
                      f_lo, f_hi);
  auto tol = [rel_tol, scale_floor](double a, double b) {
    return std::abs(b - a) <= rel_tol * std::max({std::abs(a), std::abs(b), scale_floor});
  };
  std::uintmax_t iters = max_iter;
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi, tol, iters, NoThrowPolicy());
  // toms748 does not hand back the residuals at the final bracket.
  const double fa = f(a);
  const double fb = (b == a) ? fa : f(b);
  return {a, b, fa, fb, iters};
}

/// Root of a strictly monotone f on [lo, hi] by Newton's method safeguarded
/// with bisection; fdf returns (f, f'). The bracket must contain a sign change.
template <class FdF>
double safeguarded_newton(FdF&& fdf, double lo, double hi, double guess, double abs_tol,
                          int max_iter = 200) {
  double f_lo = std::get<0>(fdf(lo));
  double f_hi = std::get<0>(fdf(hi));
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  if ((f_lo > 0.0) == (f_hi > 0.0))
    throw SolverError("pointwise root not bracketed on [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "]: f = " + std::to_string(f_lo) + ", " +
                          std::to_string(f_hi),
                      f_lo, f_hi);
  // Boost terminates on relative step size; pick enough bits that the step
  // falls under abs_tol at the bracket's magnitude.
  const double scale = std::max({std::abs(lo), std::abs(hi), 1.0});
  const int wanted = static_cast<int>(std::ceil(-std::log2(abs_tol / scale))) + 2;
  const int digits = std::clamp(wanted, 8, std::numeric_limits<double>::digits - 4);
  std::uintmax_t iters = static_cast<std::uintmax_t>(max_iter);
  return boost::math::tools::newton_raphson_iterate(fdf, guess, lo, hi, digits, iters);
}

}  // namespace vcins::roots
