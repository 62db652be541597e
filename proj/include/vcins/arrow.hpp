#pragma once

#include <algorithm>

#include "vcins/problem.hpp"
#include "vcins/roots.hpp"

namespace vcins {

/// Optimal deductible of the unconstrained (Arrow) problem.
struct ArrowSolution {
  double d_star = 0.0;
  double phi_at_d = 0.0;
  double var_at_d = 0.0;  // var[(X - d*)_+]
};

/// Ratio E[U'(W)] / U'(w0 - d - premium) for the stop-loss contract (x - d)_+.
inline double phi(const GridMeasure& measure, const UtilityModel& utility, double w0, double rho,
                  double d) {
  const double premium = (1.0 + rho) * measure.stop_loss_mean(d);
  const double num =
      measure.expectation([&](double x) { return utility.mu(w0 - std::min(x, d) - premium); });
  return num / utility.mu(w0 - d - premium);
}

/// d* = sup{d in [VaR, M) : phi(d) >= 1/(1+rho)} v VaR, with sup(empty) = 0.
/// phi is decreasing on [VaR, M), so the sup is found by bisection.
inline ArrowSolution arrow_deductible(const GridMeasure& measure, const UtilityModel& utility,
                                      double w0, double rho, const SolverOptions& opts = {}) {
  const double top = measure.support_max();
  const double threshold = 1.0 / (1.0 + rho);
  const double var_floor = measure.var_threshold(rho);

  auto finish = [&](double d) {
    ArrowSolution s;
    s.d_star = d;
    s.phi_at_d = (d < top) ? phi(measure, utility, w0, rho, d) : phi(measure, utility, w0, rho, top);
    s.var_at_d = measure.stop_loss_var(d);
    return s;
  };

  // Fair pricing: full insurance.
  if (rho == 0.0) return finish(0.0);
  if (var_floor >= top) return finish(top);

  auto clears = [&](double d) { return phi(measure, utility, w0, rho, d) >= threshold; };
  if (!clears(var_floor)) return finish(var_floor);
  if (clears(top)) return finish(top);
  const double d = roots::bisect_sup(clears, var_floor, top, opts.deductible_rel_tol * top);
  return finish(d);
}

inline ArrowSolution arrow_deductible(const Problem& p, const SolverOptions& opts = {}) {
  return arrow_deductible(p.measure, p.utility, p.w0, p.rho, opts);
}

/// The variance bound does not bind: the stop-loss at d* is optimal.
inline bool is_variance_slack(const ArrowSolution& arrow, double nu) { return nu >= arrow.var_at_d; }

}  // namespace vcins
