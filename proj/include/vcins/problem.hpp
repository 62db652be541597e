#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "vcins/loss_model.hpp"
#include "vcins/utility.hpp"

namespace vcins {

/// Numerical knobs shared by the solver and the oracle.
struct SolverOptions {
  double inner_root_tol = 1e-12;    // pointwise indemnity equation, absolute
  double outer_rel_tol = 1e-12;     // nested (m, beta) / (m, d~) solves, relative bracket width
  double deductible_rel_tol = 1e-9; // Arrow deductible, relative to M
  std::size_t max_outer_iter = 200;
  std::size_t fallback_scan = 64;   // probe count when a residual map is not monotone
  double oracle_pg_tol = 1e-8;      // projected-gradient norm
  std::size_t oracle_max_iter = 400000;

  friend bool operator==(const SolverOptions&, const SolverOptions&) = default;
};

/// Discretized problem data: loss law, preferences, initial wealth, safety
/// loading and the insurer's variance bound.
struct Problem {
  GridMeasure measure;
  UtilityModel utility;
  double w0 = 0.0;
  double rho = 0.0;
  double nu = 0.0;

  /// Lowest wealth any feasible contract can produce, w0 - M - (1+rho) E[X].
  double wealth_floor() const { return w0 - measure.support_max() - (1.0 + rho) * measure.mean(); }

  friend bool operator==(const Problem&, const Problem&) = default;
};

inline std::vector<std::string> validate(const Problem& p) {
  std::vector<std::string> problems;
  if (!std::isfinite(p.w0)) problems.push_back("w0 must be finite");
  if (!(p.rho >= 0.0) || !std::isfinite(p.rho)) problems.push_back("rho must be >= 0");
  if (!(p.nu > 0.0) || !std::isfinite(p.nu)) problems.push_back("nu must be > 0");
  if (problems.empty()) {
    const double floor = p.wealth_floor();
    const double top = p.w0;
    if (!p.utility.in_domain(floor))
      problems.push_back("w0 = " + std::to_string(p.w0) + " leaves the lowest reachable wealth " +
                         std::to_string(floor) + " outside the " + p.utility.name() +
                         " domain (need w0 > M + (1+rho) E[X])");
    if (!p.utility.in_domain(top))
      problems.push_back("w0 = " + std::to_string(p.w0) + " outside the " + p.utility.name() +
                         " domain");
  }
  return problems;
}

}  // namespace vcins
