#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vcins/vcins.hpp"

// Shared fixtures and generators for the unit, property and acceptance tests.
namespace vcins::testing {

inline GridMeasure uniform_grid(double top, std::size_t n = kDefaultGridSize, double atom = 0.0) {
  return discretize(ContinuousTruncatedLoss{UniformFamily{}, top, atom}, n);
}

inline GridMeasure exponential_grid(double rate, double top, std::size_t n = kDefaultGridSize,
                                    double atom = 0.0) {
  return discretize(ContinuousTruncatedLoss{ExponentialFamily{rate}, top, atom}, n);
}

inline GridMeasure bernoulli(double low_p, double high) {
  return discretize(DiscreteLoss{{{0.0, low_p}, {high, 1.0 - low_p}}});
}

inline double sup_gap(const std::vector<double>& a, const std::vector<double>& b) {
  double r = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) r = std::max(r, std::abs(a[i] - b[i]));
  return r;
}

/// Interior scenario drawn from the families used by the oracle comparison:
/// uniform, truncated exponential or an atom-at-zero mixture; Log, CRRA(2)
/// or CARA(1); rho in {0, 0.2}. The variance bound is a fraction of
/// var[(X - d*)_+] so the bound binds.
struct RandomScenario {
  std::string label;
  Problem problem;
};

inline RandomScenario random_interior(std::mt19937_64& rng, std::size_t n = kDefaultGridSize) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int loss_kind = static_cast<int>(rng() % 3);
  const int util_kind = static_cast<int>(rng() % 3);
  const double rho = (rng() % 2) ? 0.2 : 0.0;
  const double top = 1.0 + 4.0 * unit(rng);

  LossModel loss;
  std::string label;
  if (loss_kind == 0) {
    loss = ContinuousTruncatedLoss{UniformFamily{}, top, 0.0};
    label = "uniform";
  } else if (loss_kind == 1) {
    loss = ContinuousTruncatedLoss{ExponentialFamily{0.3 + 1.5 * unit(rng)}, top, 0.0};
    label = "exponential";
  } else {
    loss = ContinuousTruncatedLoss{ExponentialFamily{0.3 + 1.5 * unit(rng)}, top, 0.1 + 0.4 * unit(rng)};
    label = "atom-mixture";
  }
  UtilityModel utility;
  if (util_kind == 0) {
    utility = Log{};
    label += "/log";
  } else if (util_kind == 1) {
    utility = Crra{2.0};
    label += "/crra2";
  } else {
    utility = Cara{1.0};
    label += "/cara1";
  }
  label += rho > 0.0 ? "/rho=0.2" : "/rho=0";

  auto measure = discretize(loss, n);
  const double floor = top + (1.0 + rho) * measure.mean();
  const double w0 = floor + (0.5 + 2.5 * unit(rng)) * top;
  Problem p{std::move(measure), utility, w0, rho, 1.0};
  const auto arrow = arrow_deductible(p);
  p.nu = (0.2 + 0.5 * unit(rng)) * arrow.var_at_d;
  return {label, std::move(p)};
}

/// Random increasing piecewise-linear function on the nodes.
inline std::vector<double> random_increasing(std::mt19937_64& rng, std::span<const double> nodes) {
  std::uniform_real_distribution<double> slope(0.0, 2.0);
  std::vector<double> out(nodes.size());
  double prev_x = 0.0;
  double acc = slope(rng);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    acc += slope(rng) * (nodes[i] - prev_x);
    out[i] = acc;
    prev_x = nodes[i];
  }
  return out;
}

/// Double integral of F2 - F1 up to x by cumulative trapezoids on a dense
/// sweep: the textbook form of the downside-risk condition. The step c.d.f.s
/// make the quadrature error O(h), hence the loose default tolerance.
inline bool downside_by_trapezoids(const GridVariable& z1, const GridVariable& z2, std::size_t points = 20000,
                                   double tol = 1e-3) {
  double lo = std::min(*std::min_element(z1.values.begin(), z1.values.end()),
                       *std::min_element(z2.values.begin(), z2.values.end()));
  double hi = std::max(*std::max_element(z1.values.begin(), z1.values.end()),
                       *std::max_element(z2.values.begin(), z2.values.end()));
  lo -= 1.0;
  hi += 1.0;
  auto cdf = [](const GridVariable& z, double x) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.values.size(); ++i)
      if (z.values[i] <= x) s += z.probs[i];
    return s;
  };
  const double h = (hi - lo) / static_cast<double>(points);
  double inner = 0.0;
  double outer = 0.0;
  double prev_f = 0.0;
  double prev_inner = 0.0;
  for (std::size_t k = 1; k <= points; ++k) {
    const double x = lo + h * static_cast<double>(k);
    const double f = cdf(z2, x) - cdf(z1, x);
    inner += 0.5 * h * (prev_f + f);
    outer += 0.5 * h * (prev_inner + inner);
    if (outer < -tol) return false;
    prev_f = f;
    prev_inner = inner;
  }
  return true;
}

}  // namespace vcins::testing
