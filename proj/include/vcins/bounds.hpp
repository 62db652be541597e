#pragma once

#include <cmath>
#include <string>

#include "vcins/arrow.hpp"
#include "vcins/contract.hpp"

namespace vcins {

/// Bracket [m_L, m_U] for the optimal expected indemnity.
struct IndemnityBracket {
  double d_L = 0.0;  // smallest deductible >= d* whose stop-loss meets the bound
  double m_L = 0.0;
  double K_U = 0.0;  // smallest cap whose loss-capped contract reaches the bound
  double m_U = 0.0;
  bool degenerate = false;
};

/// Degeneracy tolerance on |m_U - m_L|, relative to E[X].
inline constexpr double kDegenerateRelTol = 1e-8;

inline IndemnityBracket compute_bracket(const GridMeasure& measure, const ArrowSolution& arrow,
                                        double nu) {
  if (is_variance_slack(arrow, nu))
    throw ContractViolation("variance bound " + std::to_string(nu) +
                            " is slack (var[(X-d*)_+] = " + std::to_string(arrow.var_at_d) +
                            "); the Arrow stop-loss at d* is optimal");
  const double top = measure.support_max();
  IndemnityBracket b;
  // Bisect to the last representable point; both maps are continuous and monotone.
  b.d_L = roots::bisect_inf([&](double d) { return measure.stop_loss_var(d) <= nu; }, arrow.d_star,
                            top, 0.0);
  b.K_U = roots::bisect_inf([&](double k) { return measure.cap_var(k) >= nu; }, 0.0, top, 0.0);
  b.m_L = measure.stop_loss_mean(b.d_L);
  b.m_U = measure.cap_mean(b.K_U);
  b.degenerate = std::abs(b.m_U - b.m_L) <= kDegenerateRelTol * measure.mean();
  return b;
}

/// Degenerate bracket: the loss must be Bernoulli on {0, d_L + K_U} and the
/// optimal contract pays K_U at the non-zero loss.
inline ContractSolution two_point_solution(const IndemnityBracket& bracket, const Problem& problem) {
  if (!bracket.degenerate) throw ContractViolation("two-point solution needs a degenerate bracket");
  const auto& measure = problem.measure;
  const double jump = bracket.d_L + bracket.K_U;
  const double node_tol = 1e-9 * std::max(1.0, measure.support_max());
  std::size_t support = 0;
  bool ok = true;
  for (std::size_t i = 0; i < measure.size(); ++i) {
    if (measure.weights()[i] <= 0.0) continue;
    ++support;
    const double x = measure.nodes()[i];
    if (std::abs(x) > node_tol && std::abs(x - jump) > node_tol) ok = false;
  }
  if (!ok || support != 2)
    throw InconsistencyError("degenerate bracket (m_L = m_U) on a loss that is not Bernoulli on {0, " +
                             std::to_string(jump) + "}");

  ContractSolution s;
  s.regime = TwoPoint{jump, bracket.K_U, bracket.d_L};
  s.problem = problem;
  s.table.resize(measure.size());
  for (std::size_t i = 0; i < measure.size(); ++i) {
    const double x = measure.nodes()[i];
    s.table[i] = (std::abs(x - jump) <= node_tol) ? bracket.K_U : 0.0;
  }
  s.premium = (1.0 + problem.rho) * s.expected_indemnity();
  s.diagnostics.mean_residual = 0.0;
  s.diagnostics.variance_residual = s.indemnity_variance() - problem.nu;
  return s;
}

}  // namespace vcins
