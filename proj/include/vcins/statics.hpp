#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vcins/orders.hpp"
#include "vcins/solver.hpp"

// Comparative statics under fair pricing: two solves that differ in initial
// wealth or in the variance bound, and the orderings between them.
namespace vcins {

struct Assertion {
  std::string name;
  bool passed = false;
};

struct ComparisonReport {
  Problem scenario_a;
  Problem scenario_b;
  std::pair<ContractSolution, ContractSolution> contracts;
  CrossingProfile exposure_crossings;   // e_2 against e_1
  CrossingProfile indemnity_crossings;  // I_1 against I_2
  std::pair<double, double> mean_coverage{};
  std::pair<double, double> betas{};
  std::optional<bool> downside_verdict;  // -e_2(X) has less downside risk than -e_1(X)
  std::optional<bool> convex_verdict;    // e_1(X) <=_cx e_2(X)
  double exposure_mean_error = 0.0;      // max |E[e_i(X)]|
  double exposure_moment_error = 0.0;    // max |E[e_i(X)^2] - nu_i| / nu_i
  std::vector<Assertion> assertions;

  bool all_passed() const {
    return std::all_of(assertions.begin(), assertions.end(), [](const Assertion& a) { return a.passed; });
  }
};

/// Dead band for crossing scans, relative to the size of the compared functions.
inline constexpr double kCrossingRelTol = 1e-7;

namespace detail {

inline std::vector<double> exposure(const ContractSolution& s) {
  const double m = s.expected_indemnity();
  std::vector<double> e(s.table.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = s.table[i] - m;
  return e;
}

inline double sup_abs(const std::vector<double>& a, const std::vector<double>& b) {
  double r = 0.0;
  for (double v : a) r = std::max(r, std::abs(v));
  for (double v : b) r = std::max(r, std::abs(v));
  return r;
}

inline void require_fair_interior_setup(const Problem& base) {
  if (base.rho != 0.0)
    throw PreconditionError("comparative statics assume fair pricing (rho = 0), got rho = " +
                            std::to_string(base.rho));
  if (!base.measure.continuous())
    throw PreconditionError("comparative statics need a loss c.d.f. strictly increasing on (0, M)");
}

inline std::pair<ContractSolution, ContractSolution> solve_pair(const Problem& a, const Problem& b,
                                                                const SolverOptions& opts) {
  auto second = std::async(std::launch::async, [&] { return solve(b, opts); });
  auto first = solve(a, opts);
  return {std::move(first), second.get()};
}

/// Fills the fields shared by both comparisons.
inline ComparisonReport assemble(const Problem& a, const Problem& b, const SolverOptions& opts) {
  ComparisonReport r;
  r.scenario_a = a;
  r.scenario_b = b;
  r.contracts = solve_pair(a, b, opts);
  const auto& s1 = r.contracts.first;
  const auto& s2 = r.contracts.second;
  for (const auto* s : {&s1, &s2})
    if (!s->interior())
      throw PreconditionError("comparison needs interior optima; got regime " + s->regime_name());

  const auto nodes = a.measure.nodes();
  const auto e1 = exposure(s1);
  const auto e2 = exposure(s2);
  r.exposure_crossings = upcross_count(nodes, e2, e1, kCrossingRelTol * sup_abs(e1, e2));
  r.indemnity_crossings = upcross_count(nodes, s1.table, s2.table,
                                        kCrossingRelTol * sup_abs(s1.table, s2.table));
  r.mean_coverage = {s1.expected_indemnity(), s2.expected_indemnity()};
  r.betas = {*s1.beta(), *s2.beta()};

  // Exposure moments, recomputed directly from the tables.
  const auto w = a.measure.weights();
  for (const auto& [e, nu] : {std::pair{&e1, a.nu}, std::pair{&e2, b.nu}}) {
    double m1 = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m1 += w[i] * (*e)[i];
      m2 += w[i] * (*e)[i] * (*e)[i];
    }
    r.exposure_mean_error = std::max(r.exposure_mean_error, std::abs(m1));
    r.exposure_moment_error = std::max(r.exposure_moment_error, std::abs(m2 - nu) / nu);
  }
  r.assertions.push_back({"exposure mean zero", r.exposure_mean_error <= 1e-9});
  r.assertions.push_back({"exposure second moment equals nu", r.exposure_moment_error <= 1e-8});
  return r;
}

inline bool pointwise_below(const GridMeasure& measure, const std::vector<double>& lo,
                            const std::vector<double>& hi) {
  const auto nodes = measure.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i] > 0.0 && !(lo[i] < hi[i])) return false;
  return true;
}

}  // namespace detail

/// Same problem at initial wealth w1 <= w2.
inline ComparisonReport compare_wealth(const Problem& base, double w1, double w2,
                                       const SolverOptions& opts = {}) {
  detail::require_fair_interior_setup(base);
  if (w1 > w2) throw PreconditionError("compare_wealth expects w1 <= w2");
  if (!(base.nu < base.measure.variance()))
    throw PreconditionError("variance bound must be below var[X] for the bound to bind");
  Problem a = base;
  Problem b = base;
  a.w0 = w1;
  b.w0 = w2;
  for (const auto* p : {&a, &b})
    if (auto problems = validate(*p); !problems.empty()) throw ValidationError(std::move(problems));
  const double lo = a.wealth_floor();
  if (!base.utility.is_strictly_dap(lo, w2))
    throw PreconditionError(base.utility.name() + " utility is not strictly DAP on the wealth range");

  auto r = detail::assemble(a, b, opts);
  const auto& s1 = r.contracts.first;
  const auto& s2 = r.contracts.second;
  if (w1 == w2) {
    r.assertions.push_back({"identical contracts", s1.table == s2.table});
    r.assertions.push_back({"no exposure crossings", r.exposure_crossings.count == 0});
    return r;
  }
  r.assertions.push_back({"exposure up-crosses twice", r.exposure_crossings.count == 2 &&
                                                          r.exposure_crossings.direction_first == 1});
  r.assertions.push_back({"mean coverage increases", r.mean_coverage.first < r.mean_coverage.second});
  r.assertions.push_back({"beta decreases", r.betas.second < r.betas.first});
  const bool below = detail::pointwise_below(base.measure, s1.table, s2.table);
  const bool single = r.indemnity_crossings.count == 1 && r.indemnity_crossings.direction_first == 1;
  r.assertions.push_back({"indemnity below or single up-cross", below || single});

  const auto w = base.measure.weights();
  auto e1 = detail::exposure(s1);
  auto e2 = detail::exposure(s2);
  for (double& v : e1) v = -v;
  for (double& v : e2) v = -v;
  r.downside_verdict = less_downside_risk(transform(e2, w), transform(e1, w));
  r.assertions.push_back({"less downside risk", *r.downside_verdict});
  return r;
}

/// Same problem under variance bounds nu1 <= nu2.
inline ComparisonReport compare_variance(const Problem& base, double nu1, double nu2,
                                         const SolverOptions& opts = {}) {
  detail::require_fair_interior_setup(base);
  if (!(nu1 > 0.0 && nu1 <= nu2)) throw PreconditionError("compare_variance expects 0 < nu1 <= nu2");
  if (!(nu2 < base.measure.variance()))
    throw PreconditionError("nu2 = " + std::to_string(nu2) + " does not bind: var[X] = " +
                            std::to_string(base.measure.variance()));
  Problem a = base;
  Problem b = base;
  a.nu = nu1;
  b.nu = nu2;

  auto r = detail::assemble(a, b, opts);
  const auto& s1 = r.contracts.first;
  const auto& s2 = r.contracts.second;
  if (nu1 == nu2) {
    r.assertions.push_back({"identical contracts", s1.table == s2.table});
    r.assertions.push_back({"no exposure crossings", r.exposure_crossings.count == 0});
    return r;
  }
  r.assertions.push_back({"exposure up-crosses once", r.exposure_crossings.count == 1 &&
                                                         r.exposure_crossings.direction_first == 1});
  r.assertions.push_back({"mean coverage increases", r.mean_coverage.first < r.mean_coverage.second});
  r.assertions.push_back({"beta decreases", r.betas.second < r.betas.first});
  if (base.utility.is_prudent())
    r.assertions.push_back({"indemnity pointwise below",
                            detail::pointwise_below(base.measure, s1.table, s2.table)});
  const auto w = base.measure.weights();
  const auto e1 = detail::exposure(s1);
  const auto e2 = detail::exposure(s2);
  const double tol = 1e-9 * std::max(1.0, detail::sup_abs(e1, e2));
  r.convex_verdict = convex_order_leq(transform(e1, w), transform(e2, w), tol);
  r.assertions.push_back({"convex order", *r.convex_verdict});
  return r;
}

}  // namespace vcins
