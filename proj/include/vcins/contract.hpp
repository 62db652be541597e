#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <type_traits>
#include <variant>
#include <vector>

#include "vcins/problem.hpp"
#include "vcins/roots.hpp"

namespace vcins {

// ---------------------------------------------------------------------------
// Pointwise indemnity
// ---------------------------------------------------------------------------

/// I_{lambda,beta}(x) = sup{y in [0, x] : U'(c - x + y) - lambda - 2 beta y >= 0}
/// where c = w0 - (1+rho) m is wealth net of premium. The left side is
/// strictly decreasing in y, so the supremum is 0, x, or the unique root.
inline double indemnity_lambda_beta(double x, double lambda, double beta, double net_wealth,
                                    const UtilityModel& utility, double abs_tol = 1e-12) {
  if (x <= 0.0) return 0.0;
  auto g = [&](double y) {
    return std::make_tuple(utility.mu(net_wealth - x + y) - lambda - 2.0 * beta * y,
                           utility.ddu(net_wealth - x + y) - 2.0 * beta);
  };
  const double g0 = std::get<0>(g(0.0));
  if (g0 <= 0.0) return 0.0;
  const double gx = std::get<0>(g(x));
  if (gx >= 0.0) return x;
  // Newton from the linearization at y = 0 lands close for small x.
  const double guess = std::clamp(g0 / -std::get<1>(g(0.0)), 0.0, x);
  return roots::safeguarded_newton(g, 0.0, x, guess, abs_tol);
}

struct FairBranch {};
struct LoadedBranch {
  double d_tilde = 0.0;
};
using Branch = std::variant<FairBranch, LoadedBranch>;

/// Optimal indemnity at loss x for the fair (rho = 0) or loaded (rho > 0)
/// interior regime. For the loaded branch `beta` is half the slope
/// coefficient of the equation, i.e. the recovered beta*.
inline double indemnity_pointwise(double x, double m, double beta, const UtilityModel& utility,
                                  double w0, double rho, const Branch& branch,
                                  double abs_tol = 1e-12) {
  const double net = w0 - (1.0 + rho) * m;
  if (std::holds_alternative<FairBranch>(branch))
    return indemnity_lambda_beta(x, utility.mu(net), beta, net, utility, abs_tol);
  const double d = std::get<LoadedBranch>(branch).d_tilde;
  if (x <= d) return 0.0;
  return indemnity_lambda_beta(x, utility.mu(net - d), beta, net, utility, abs_tol);
}

/// Slope coefficient of the loaded equation divided by two:
/// (U'(c - d) - (1+rho) E[U'(c - X^d)]) / (2 m rho), c = w0 - (1+rho) m.
inline double loaded_beta(const GridMeasure& measure, const UtilityModel& utility, double w0,
                          double rho, double m, double d_tilde) {
  const double net = w0 - (1.0 + rho) * m;
  const double tail = measure.expectation(
      [&](double x) { return utility.mu(net - std::min(x, d_tilde)); });
  return (utility.mu(net - d_tilde) - (1.0 + rho) * tail) / (2.0 * m * rho);
}

// ---------------------------------------------------------------------------
// Solution
// ---------------------------------------------------------------------------

struct SlackStopLoss {
  double d_star = 0.0;
};

/// Bernoulli loss on {0, jump_at}: pay at the jump, nothing at 0. Off the two
/// atoms the schedule is the deductible (x - deductible)_+, which passes through
/// both points.
struct TwoPoint {
  double jump_at = 0.0;
  double pay = 0.0;
  double deductible = 0.0;
};

struct InteriorFair {
  double m_star = 0.0;
  double beta_star = 0.0;
  double lambda_star = 0.0;
};

struct InteriorLoaded {
  double m_star = 0.0;
  double beta_star = 0.0;
  double d_tilde = 0.0;
  double lambda_star = 0.0;
};

using Regime = std::variant<SlackStopLoss, TwoPoint, InteriorFair, InteriorLoaded>;

struct Diagnostics {
  double mean_residual = 0.0;      // E[I*] - m*
  double variance_residual = 0.0;  // var[I*] - nu
  std::size_t outer_iterations = 0;
  std::size_t inner_iterations = 0;
  bool fallback_scan = false;
};

/// Solved contract: regime parameters, the problem it solves, and the
/// indemnity tabulated at the grid nodes.
struct ContractSolution {
  Regime regime;
  Problem problem;
  std::vector<double> table;
  double premium = 0.0;
  Diagnostics diagnostics;
  double inner_root_tol = 1e-12;

  std::string regime_name() const {
    switch (regime.index()) {
      case 0: return "slack-stop-loss";
      case 1: return "two-point";
      case 2: return "interior-fair";
      default: return "interior-loaded";
    }
  }

  bool interior() const {
    return std::holds_alternative<InteriorFair>(regime) ||
           std::holds_alternative<InteriorLoaded>(regime);
  }

  /// Start of the coinsurance region.
  double deductible() const {
    return std::visit(
        [](const auto& r) -> double {
          using R = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<R, SlackStopLoss>) return r.d_star;
          else if constexpr (std::is_same_v<R, TwoPoint>) return r.deductible;
          else if constexpr (std::is_same_v<R, InteriorFair>) return 0.0;
          else return r.d_tilde;
        },
        regime);
  }

  /// Multiplier of the variance constraint; zero when it is slack, absent
  /// for the two-point case where it is not identified.
  std::optional<double> beta() const {
    if (std::holds_alternative<SlackStopLoss>(regime)) return 0.0;
    if (const auto* f = std::get_if<InteriorFair>(&regime)) return f->beta_star;
    if (const auto* l = std::get_if<InteriorLoaded>(&regime)) return l->beta_star;
    return std::nullopt;
  }

  double m_star() const {
    if (const auto* f = std::get_if<InteriorFair>(&regime)) return f->m_star;
    if (const auto* l = std::get_if<InteriorLoaded>(&regime)) return l->m_star;
    return expected_indemnity();
  }

  double expected_indemnity() const { return problem.measure.mean_of(table); }
  double indemnity_variance() const { return problem.measure.variance_of(table); }

  /// Exact indemnity at any x in [0, M].
  double at(double x) const {
    return std::visit(
        [&](const auto& r) -> double {
          using R = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<R, SlackStopLoss>) {
            return std::max(x - r.d_star, 0.0);
          } else if constexpr (std::is_same_v<R, TwoPoint>) {
            return std::max(x - r.deductible, 0.0);
          } else if constexpr (std::is_same_v<R, InteriorFair>) {
            return indemnity_pointwise(x, r.m_star, r.beta_star, problem.utility, problem.w0, 0.0,
                                       FairBranch{}, inner_root_tol);
          } else {
            return indemnity_pointwise(x, r.m_star, r.beta_star, problem.utility, problem.w0,
                                       problem.rho, LoadedBranch{r.d_tilde}, inner_root_tol);
          }
        },
        regime);
  }

  /// Piecewise-linear interpolation of the node table, anchored at I(0) = 0.
  double interpolate(double x) const {
    const auto nodes = problem.measure.nodes();
    if (x <= 0.0) return 0.0;
    double x0 = 0.0;
    double y0 = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (x <= nodes[i]) {
        if (nodes[i] == x0) return table[i];
        return y0 + (table[i] - y0) * (x - x0) / (nodes[i] - x0);
      }
      x0 = nodes[i];
      y0 = table[i];
    }
    // Past the last node the marginal indemnity is at most one.
    return y0 + std::min(marginal(x0), 1.0) * (x - x0);
  }

  /// Closed-form marginal indemnity I'(x) (right derivative).
  double marginal(double x) const {
    return std::visit(
        [&](const auto& r) -> double {
          using R = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<R, SlackStopLoss>) {
            return x >= r.d_star ? 1.0 : 0.0;
          } else if constexpr (std::is_same_v<R, TwoPoint>) {
            return x >= r.deductible ? 1.0 : 0.0;
          } else {
            double rho = 0.0;
            if constexpr (std::is_same_v<R, InteriorLoaded>) {
              rho = problem.rho;
              if (x < r.d_tilde) return 0.0;
            }
            const double y = at(x);
            if (x > 0.0 && y >= x) return 1.0;
            const double wealth = problem.w0 - (1.0 + rho) * r.m_star - x + y;
            const double curv = -problem.utility.ddu(wealth);
            return curv / (2.0 * r.beta_star + curv);
          }
        },
        regime);
  }
};

/// Insured's expected utility E[U(w0 - X + I(X) - (1+rho) E[I(X)])] for an
/// indemnity given at the grid nodes.
inline double expected_utility(const Problem& p, std::span<const double> indemnity) {
  const double premium = (1.0 + p.rho) * p.measure.mean_of(indemnity);
  const auto nodes = p.measure.nodes();
  const auto weights = p.measure.weights();
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    s += weights[i] * p.utility.u(p.w0 - nodes[i] + indemnity[i] - premium);
  return s;
}

/// Tabulates the schedule at every grid node.
inline std::vector<double> tabulate(const ContractSolution& s) {
  const auto nodes = s.problem.measure.nodes();
  std::vector<double> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = s.at(nodes[i]);
  return out;
}

}  // namespace vcins
