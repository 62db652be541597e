#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vcins/arrow.hpp"
#include "vcins/bounds.hpp"
#include "vcins/contract.hpp"

namespace vcins {

/// (E[I] - m, var[I] - nu) for an indemnity tabulated on the grid.
struct ResidualPair {
  double mean = 0.0;
  double variance = 0.0;
};

namespace detail {

inline std::vector<double> fair_table(const Problem& p, double m, double beta, double tol) {
  const auto nodes = p.measure.nodes();
  std::vector<double> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    out[i] = indemnity_pointwise(nodes[i], m, beta, p.utility, p.w0, 0.0, FairBranch{}, tol);
  return out;
}

inline std::vector<double> loaded_table(const Problem& p, double m, double beta, double d,
                                        double tol) {
  const auto nodes = p.measure.nodes();
  std::vector<double> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i)
    out[i] = indemnity_pointwise(nodes[i], m, beta, p.utility, p.w0, p.rho, LoadedBranch{d}, tol);
  return out;
}

/// Inner solve at a fixed expected indemnity m: the free parameter (beta for
/// the fair branch, d~ for the loaded one) that binds the variance.
struct InnerSolution {
  double beta = 0.0;
  double d_tilde = 0.0;
  std::vector<double> table;
  double variance_residual = 0.0;
  std::size_t iterations = 0;
  bool scanned = false;
};

/// First sign change of f on a uniform probe grid over [lo, hi]; probes where
/// f is undefined (nullopt) are skipped.
template <class F>
std::optional<std::pair<double, double>> scan_sign_change(F&& f, double lo, double hi,
                                                          std::size_t probes) {
  std::optional<double> prev_x;
  std::optional<double> prev_f;
  for (std::size_t k = 0; k <= probes; ++k) {
    const double x = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(probes);
    const auto fx = f(x);
    if (!fx) continue;
    if (prev_f && ((*prev_f > 0.0) != (*fx > 0.0) || *fx == 0.0)) return std::make_pair(*prev_x, x);
    prev_x = x;
    prev_f = fx;
  }
  return std::nullopt;
}

/// Fair branch: var[I_{m,beta}] falls from var[X] (beta -> 0) to 0 (beta -> inf).
/// Solved in t = log(beta) after an expanding bracket search that also checks
/// the residual is decreasing; a probe scan takes over if it is not.
inline InnerSolution solve_fair_inner(const Problem& p, double m, const SolverOptions& opts) {
  std::size_t evals = 0;
  auto v = [&](double t) {
    ++evals;
    return p.measure.variance_of(fair_table(p, m, std::exp(t), opts.inner_root_tol)) - p.nu;
  };

  constexpr double kStep = 2.0;
  constexpr int kMaxSteps = 40;
  double t_lo = 0.0;
  double v_lo = v(t_lo);
  double t_hi = t_lo;
  double v_hi = v_lo;
  bool monotone = true;
  bool found = false;
  if (v_lo > 0.0) {
    for (int k = 0; k < kMaxSteps; ++k) {
      const double t = t_hi + kStep;
      const double vt = v(t);
      if (vt > v_hi) monotone = false;
      t_lo = t_hi;
      v_lo = v_hi;
      t_hi = t;
      v_hi = vt;
      if (vt <= 0.0) {
        found = true;
        break;
      }
    }
  } else {
    for (int k = 0; k < kMaxSteps; ++k) {
      const double t = t_lo - kStep;
      const double vt = v(t);
      if (vt < v_lo) monotone = false;
      t_hi = t_lo;
      v_hi = v_lo;
      t_lo = t;
      v_lo = vt;
      if (vt > 0.0) {
        found = true;
        break;
      }
    }
  }

  InnerSolution out;
  if (!found || !monotone) {
    out.scanned = true;
    const double span = kStep * kMaxSteps;
    auto bracket = scan_sign_change([&](double t) -> std::optional<double> { return v(t); }, -span,
                                    span, opts.fallback_scan);
    if (!bracket)
      throw SolverError("no beta binds the variance at m = " + std::to_string(m), 0.0, v_lo);
    t_lo = bracket->first;
    t_hi = bracket->second;
    v_lo = v(t_lo);
    v_hi = v(t_hi);
  }
  auto r = roots::solve_bracketed(v, t_lo, t_hi, v_lo, v_hi, opts.outer_rel_tol,
                                  opts.max_outer_iter, 1.0);
  out.beta = std::exp(r.best());
  out.table = fair_table(p, m, out.beta, opts.inner_root_tol);
  out.variance_residual = p.measure.variance_of(out.table) - p.nu;
  out.iterations = evals;
  return out;
}

/// Smallest d~ at which the recovered beta is positive: the root of
/// U'(c - d) - (1+rho) E[U'(c - X^d)], which is increasing in d.
inline std::optional<double> loaded_beta_floor(const Problem& p, double m, const SolverOptions& opts) {
  const double net = p.w0 - (1.0 + p.rho) * m;
  const double top = p.measure.support_max();
  auto r = [&](double d) {
    const double tail =
        p.measure.expectation([&](double x) { return p.utility.mu(net - std::min(x, d)); });
    return p.utility.mu(net - d) - (1.0 + p.rho) * tail;
  };
  const double r_top = r(top);
  if (!(r_top > 0.0)) return std::nullopt;
  const double r0 = r(0.0);
  auto b = roots::solve_bracketed(r, 0.0, top, r0, r_top, opts.outer_rel_tol, opts.max_outer_iter);
  // Keep the side where beta > 0.
  return b.f_hi > 0.0 ? b.hi : b.lo;
}

/// Loaded branch: at fixed m, the variance falls from var[(X - d0)_+] as d~
/// rises from the beta-positivity floor d0 to M.
inline std::optional<InnerSolution> solve_loaded_inner(const Problem& p, double m,
                                                       const SolverOptions& opts) {
  const auto floor = loaded_beta_floor(p, m, opts);
  if (!floor) return std::nullopt;
  const double top = p.measure.support_max();
  std::size_t evals = 0;
  auto beta_at = [&](double d) { return loaded_beta(p.measure, p.utility, p.w0, p.rho, m, d); };
  auto v = [&](double d) {
    ++evals;
    const double beta = beta_at(d);
    if (!(beta > 0.0)) return p.measure.stop_loss_var(d) - p.nu;
    return p.measure.variance_of(loaded_table(p, m, beta, d, opts.inner_root_tol)) - p.nu;
  };
  double d_lo = *floor;
  if (d_lo >= top) return std::nullopt;
  double v_lo = v(d_lo);
  const double v_hi = v(top);
  if (!(v_lo > 0.0)) return std::nullopt;

  InnerSolution out;
  auto r = roots::solve_bracketed(v, d_lo, top, v_lo, v_hi, opts.outer_rel_tol, opts.max_outer_iter);
  double d = r.best();
  // Monotonicity check on the two flanks of the root.
  const bool monotone = v(0.5 * (d_lo + d)) >= 0.0 && v(0.5 * (d + top)) <= 0.0;
  if (!monotone) {
    out.scanned = true;
    auto bracket = scan_sign_change([&](double x) -> std::optional<double> { return v(x); }, d_lo,
                                    top, opts.fallback_scan);
    if (bracket) {
      r = roots::solve_bracketed(v, bracket->first, bracket->second, v(bracket->first),
                                 v(bracket->second), opts.outer_rel_tol, opts.max_outer_iter);
      d = r.best();
    }
  }
  out.d_tilde = d;
  out.beta = beta_at(d);
  if (!(out.beta > 0.0)) return std::nullopt;
  out.table = loaded_table(p, m, out.beta, d, opts.inner_root_tol);
  out.variance_residual = p.measure.variance_of(out.table) - p.nu;
  out.iterations = evals;
  return out;
}

inline std::optional<InnerSolution> solve_inner(const Problem& p, double m, const SolverOptions& opts) {
  if (p.rho == 0.0) {
    try {
      return solve_fair_inner(p, m, opts);
    } catch (const SolverError&) {
      return std::nullopt;
    }
  }
  return solve_loaded_inner(p, m, opts);
}

}  // namespace detail

/// Residual pair at trial parameters: (m, beta) when rho = 0, (m, d~) when
/// rho > 0 with beta recovered from the loaded slope coefficient.
inline ResidualPair residuals(const Problem& p, double m, double beta_or_dtilde,
                              const SolverOptions& opts = {}) {
  std::vector<double> table;
  if (p.rho == 0.0) {
    if (!(beta_or_dtilde > 0.0)) throw PreconditionError("beta must be positive");
    table = detail::fair_table(p, m, beta_or_dtilde, opts.inner_root_tol);
  } else {
    const double beta = loaded_beta(p.measure, p.utility, p.w0, p.rho, m, beta_or_dtilde);
    if (!(beta > 0.0))
      throw PreconditionError("d~ = " + std::to_string(beta_or_dtilde) +
                              " gives a non-positive slope coefficient");
    table = detail::loaded_table(p, m, beta, beta_or_dtilde, opts.inner_root_tol);
  }
  return {p.measure.mean_of(table) - m, p.measure.variance_of(table) - p.nu};
}

/// Interior optimum inside the bracket (m_L, m_U): outer solve on m for the
/// mean residual, inner solve for the variance at each trial m.
inline ContractSolution solve_interior(const Problem& p, const IndemnityBracket& bracket,
                                       const SolverOptions& opts = {}) {
  if (!p.measure.continuous())
    throw UnsupportedScenario(
        "interior regime needs a loss whose c.d.f. is strictly increasing on (0, M); "
        "discrete losses are only supported in the slack and two-point regimes");

  std::size_t inner_evals = 0;
  bool scanned = false;
  auto h = [&](double m) -> std::optional<double> {
    auto inner = detail::solve_inner(p, m, opts);
    if (!inner) return std::nullopt;
    inner_evals += inner->iterations;
    scanned = scanned || inner->scanned;
    return p.measure.mean_of(inner->table) - m;
  };
  auto h_strict = [&](double m) {
    auto v = h(m);
    if (!v) throw SolverError("inner solve infeasible at m = " + std::to_string(m), 0.0, 0.0);
    return *v;
  };

  const double lo = bracket.m_L;
  const double hi = bracket.m_U;
  std::optional<roots::Bracketed> outer;
  const auto h_lo = h(lo);
  const auto h_hi = h(hi);
  try {
    if (h_lo && h_hi && ((*h_lo > 0.0) != (*h_hi > 0.0) || *h_lo == 0.0 || *h_hi == 0.0))
      outer = roots::solve_bracketed(h_strict, lo, hi, *h_lo, *h_hi, opts.outer_rel_tol,
                                     opts.max_outer_iter);
  } catch (const SolverError&) {
    outer.reset();
  }
  if (!outer) {
    scanned = true;
    auto sc = detail::scan_sign_change(h, lo, hi, opts.fallback_scan);
    if (!sc) {
      throw SolverError("mean residual does not change sign on (m_L, m_U) = (" + std::to_string(lo) +
                            ", " + std::to_string(hi) + ")",
                        h_lo.value_or(std::numeric_limits<double>::quiet_NaN()),
                        h_hi.value_or(std::numeric_limits<double>::quiet_NaN()));
    }
    outer = roots::solve_bracketed(h_strict, sc->first, sc->second, h_strict(sc->first),
                                   h_strict(sc->second), opts.outer_rel_tol, opts.max_outer_iter);
  }

  const double m = outer->best();
  auto inner = detail::solve_inner(p, m, opts);
  if (!inner) throw SolverError("inner solve infeasible at the converged m*", outer->best_residual(), 0.0);

  ContractSolution s;
  s.problem = p;
  s.table = inner->table;
  s.inner_root_tol = opts.inner_root_tol;
  s.premium = (1.0 + p.rho) * m;
  if (p.rho == 0.0) {
    s.regime = InteriorFair{m, inner->beta, p.utility.mu(p.w0 - m)};
  } else {
    const double d = inner->d_tilde;
    s.regime = InteriorLoaded{m, inner->beta, d, p.utility.mu(p.w0 - d - (1.0 + p.rho) * m)};
  }
  s.diagnostics.mean_residual = p.measure.mean_of(s.table) - m;
  s.diagnostics.variance_residual = p.measure.variance_of(s.table) - p.nu;
  s.diagnostics.outer_iterations = outer->iterations;
  s.diagnostics.inner_iterations = inner_evals;
  s.diagnostics.fallback_scan = scanned;

  const double mean_tol = 1e-8 * p.measure.mean();
  const double var_tol = 1e-8 * p.nu;
  if (std::abs(s.diagnostics.mean_residual) > mean_tol ||
      std::abs(s.diagnostics.variance_residual) > var_tol)
    throw SolverError("interior solve did not converge", s.diagnostics.mean_residual,
                      s.diagnostics.variance_residual);
  if (!(*s.beta() > 0.0)) throw SolverError("recovered beta* is not positive", 0.0, 0.0);
  if (const auto* l = std::get_if<InteriorLoaded>(&s.regime)) {
    const double floor = p.measure.var_threshold(p.rho);
    if (!(l->d_tilde > floor && l->d_tilde < p.measure.support_max()))
      throw SolverError("deductible d~ = " + std::to_string(l->d_tilde) + " outside (VaR, M)",
                        s.diagnostics.mean_residual, s.diagnostics.variance_residual);
  }
  return s;
}

/// Full dispatch: slack stop-loss, two-point, or interior (fair / loaded).
inline ContractSolution solve(const Problem& p, const SolverOptions& opts = {}) {
  if (auto problems = validate(p); !problems.empty()) throw ValidationError(std::move(problems));
  const auto arrow = arrow_deductible(p, opts);
  if (is_variance_slack(arrow, p.nu)) {
    ContractSolution s;
    s.regime = SlackStopLoss{arrow.d_star};
    s.problem = p;
    s.inner_root_tol = opts.inner_root_tol;
    s.table = tabulate(s);
    s.premium = (1.0 + p.rho) * p.measure.stop_loss_mean(arrow.d_star);
    s.diagnostics.mean_residual = 0.0;
    s.diagnostics.variance_residual = s.indemnity_variance() - p.nu;
    return s;
  }
  const auto bracket = compute_bracket(p.measure, arrow, p.nu);
  if (bracket.degenerate) return two_point_solution(bracket, p);
  return solve_interior(p, bracket, opts);
}

// ---------------------------------------------------------------------------
// Certification
// ---------------------------------------------------------------------------

namespace detail {

struct KktTerms {
  std::vector<double> integrand;  // U'(W_I) - 2 beta I at each node
  double constant = 0.0;          // (1+rho) E[U'(W_I)] - 2 beta E[I]
  double mean_marginal_utility = 0.0;
};

inline KktTerms kkt_terms(const ContractSolution& s) {
  const auto beta = s.beta();
  if (!beta) throw PreconditionError("the " + s.regime_name() + " regime has no identified beta*");
  const auto& p = s.problem;
  const auto nodes = p.measure.nodes();
  const double mean_i = s.expected_indemnity();
  const double premium = (1.0 + p.rho) * mean_i;
  KktTerms t;
  t.integrand.resize(nodes.size());
  std::vector<double> marginal_u(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    marginal_u[i] = p.utility.mu(p.w0 - nodes[i] + s.table[i] - premium);
    t.integrand[i] = marginal_u[i] - 2.0 * *beta * s.table[i];
  }
  t.mean_marginal_utility = p.measure.mean_of(marginal_u);
  t.constant = (1.0 + p.rho) * t.mean_marginal_utility - 2.0 * *beta * mean_i;
  return t;
}

}  // namespace detail

/// Phi(x) = E[U'(W) - 2 beta* I | X > x] - ((1+rho) E[U'(W)] - 2 beta* E[I]).
inline double kkt_phi(const ContractSolution& s, double x) {
  const auto t = detail::kkt_terms(s);
  return s.problem.measure.tail_expectation(t.integrand, x) - t.constant;
}

/// Phi just left of each node, i.e. conditioned on X >= x_j: the stationarity
/// residual of the slope on the grid interval ending at x_j.
inline std::vector<double> kkt_profile(const ContractSolution& s) {
  const auto t = detail::kkt_terms(s);
  const auto w = s.problem.measure.weights();
  const std::size_t n = w.size();
  std::vector<double> out(n);
  double num = 0.0;
  double mass = 0.0;
  for (std::size_t j = n; j-- > 0;) {
    num += w[j] * t.integrand[j];
    mass += w[j];
    out[j] = (mass > 0.0 ? num / mass : t.integrand[j]) - t.constant;
  }
  return out;
}

/// Grid slopes (I_j - I_{j-1}) / (x_j - x_{j-1}) with I = 0 at x = 0. A node at
/// zero gets the slope of the next interval.
inline std::vector<double> grid_marginals(const GridMeasure& measure, std::span<const double> table) {
  const auto nodes = measure.nodes();
  std::vector<double> out(nodes.size(), 0.0);
  double x0 = 0.0;
  double y0 = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double dx = nodes[i] - x0;
    out[i] = dx > 0.0 ? (table[i] - y0) / dx : std::numeric_limits<double>::quiet_NaN();
    x0 = nodes[i];
    y0 = table[i];
  }
  for (std::size_t i = nodes.size(); i-- > 0;)
    if (std::isnan(out[i])) out[i] = (i + 1 < nodes.size()) ? out[i + 1] : 0.0;
  return out;
}

struct KktReport {
  double max_abs_phi_coinsurance = 0.0;  // over intervals with slope in (0, 1)
  double max_phi_deductible = -std::numeric_limits<double>::infinity();  // over slope-0 intervals
  double min_phi_full = std::numeric_limits<double>::infinity();         // over slope-1 intervals
  double scale = 0.0;                    // E[U'(W)]
  std::size_t coinsurance_nodes = 0;
  std::size_t deductible_nodes = 0;
  std::size_t full_nodes = 0;
  bool passed = false;
};

/// Bang-bang sign pattern of Phi against the grid marginals: |Phi| small where
/// the slope is interior, Phi < 0 where it is 0, Phi >= 0 where it is 1.
inline KktReport certify_kkt(const ContractSolution& s, double rel_tol = 1e-6) {
  const auto t = detail::kkt_terms(s);
  const auto phi = kkt_profile(s);
  const auto slopes = grid_marginals(s.problem.measure, s.table);
  const auto nodes = s.problem.measure.nodes();
  KktReport r;
  r.scale = t.mean_marginal_utility;
  const double tol = rel_tol * r.scale;
  constexpr double kSlopeEps = 1e-12;
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    if (nodes[j] == 0.0) continue;
    if (slopes[j] <= kSlopeEps) {
      ++r.deductible_nodes;
      r.max_phi_deductible = std::max(r.max_phi_deductible, phi[j]);
    } else if (slopes[j] >= 1.0 - kSlopeEps) {
      ++r.full_nodes;
      r.min_phi_full = std::min(r.min_phi_full, phi[j]);
    } else {
      ++r.coinsurance_nodes;
      r.max_abs_phi_coinsurance = std::max(r.max_abs_phi_coinsurance, std::abs(phi[j]));
    }
  }
  r.passed = r.max_abs_phi_coinsurance <= tol && r.max_phi_deductible < 0.0 && r.min_phi_full >= -tol;
  return r;
}

/// x -> I(x)/x nondecreasing over the positive grid nodes.
inline bool vajda_ratio(const ContractSolution& s, double tol = 1e-9) {
  const auto nodes = s.problem.measure.nodes();
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] <= 0.0) continue;
    const double r = s.table[i] / nodes[i];
    if (r - prev < -tol) return false;
    prev = r;
  }
  return true;
}

struct IncentiveReport {
  bool zero_at_zero = false;
  bool principle_of_indemnity = false;  // 0 <= I(x) <= x
  bool marginals_in_unit_interval = false;
  bool retention_nondecreasing = false;
  bool passed() const {
    return zero_at_zero && principle_of_indemnity && marginals_in_unit_interval &&
           retention_nondecreasing;
  }
};

inline IncentiveReport check_incentive_compatible(const GridMeasure& measure,
                                                  std::span<const double> table,
                                                  double tol = 1e-12) {
  const auto nodes = measure.nodes();
  IncentiveReport r;
  r.zero_at_zero = true;
  r.principle_of_indemnity = true;
  r.marginals_in_unit_interval = true;
  r.retention_nondecreasing = true;
  double prev_retention = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double x = nodes[i];
    const double y = table[i];
    if (x == 0.0 && std::abs(y) > tol) r.zero_at_zero = false;
    if (y < -tol || y > x + tol) r.principle_of_indemnity = false;
    if (x - y < prev_retention - tol) r.retention_nondecreasing = false;
    prev_retention = x - y;
  }
  for (double m : grid_marginals(measure, table))
    if (m < -1e-9 || m > 1.0 + 1e-9) r.marginals_in_unit_interval = false;
  return r;
}

inline IncentiveReport check_incentive_compatible(const ContractSolution& s, double tol = 1e-12) {
  auto r = check_incentive_compatible(s.problem.measure, s.table, tol);
  r.zero_at_zero = r.zero_at_zero && s.at(0.0) == 0.0;
  return r;
}

}  // namespace vcins
