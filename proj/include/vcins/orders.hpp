#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "vcins/errors.hpp"

namespace vcins {

/// Sign changes of f - g along a grid.
struct CrossingProfile {
  std::size_t count = 0;
  std::vector<double> locations;  // strictly ascending
  int direction_first = 0;        // sign of f - g right after the first crossing, 0 if none
};

/// Scans sign(f - g) with a dead band of half-width tol. Nodes inside the band
/// are dropped, so contact without a sign change is not a crossing. Each
/// crossing is located by linear interpolation between the last node before
/// and the first node after it.
inline CrossingProfile upcross_count(std::span<const double> x, std::span<const double> f,
                                     std::span<const double> g, double tol) {
  if (x.size() != f.size() || x.size() != g.size())
    throw PreconditionError("upcross_count needs f and g on a common grid");
  CrossingProfile out;
  int prev_sign = 0;
  double prev_x = 0.0;
  double prev_d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = f[i] - g[i];
    const int sign = d > tol ? 1 : (d < -tol ? -1 : 0);
    if (sign == 0) continue;
    if (prev_sign != 0 && sign != prev_sign) {
      const double at = prev_x + (x[i] - prev_x) * prev_d / (prev_d - d);
      if (out.locations.empty()) out.direction_first = sign;
      out.locations.push_back(at);
    }
    prev_sign = sign;
    prev_x = x[i];
    prev_d = d;
  }
  out.count = out.locations.size();
  return out;
}

/// Finite random variable: values with probabilities.
struct GridVariable {
  std::vector<double> values;
  std::vector<double> probs;

  double mean() const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += probs[i] * values[i];
    return s;
  }
  double variance() const {
    const double m = mean();
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += probs[i] * (values[i] - m) * (values[i] - m);
    return s;
  }
  /// E[(Z - d)_+]
  double stop_loss(double d) const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += probs[i] * std::max(values[i] - d, 0.0);
    return s;
  }
  /// E[((x - Z)_+)^2], twice the double integral of the c.d.f. up to x.
  double lower_partial_second(double x) const {
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double v = std::max(x - values[i], 0.0);
      s += probs[i] * v * v;
    }
    return s;
  }
};

/// h(X) for a loss tabulated at grid nodes with the given probabilities.
inline GridVariable transform(std::span<const double> values, std::span<const double> probs) {
  return {std::vector<double>(values.begin(), values.end()), std::vector<double>(probs.begin(), probs.end())};
}

namespace detail {

inline std::vector<double> support_union(const GridVariable& a, const GridVariable& b) {
  std::vector<double> pts = a.values;
  pts.insert(pts.end(), b.values.begin(), b.values.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

}  // namespace detail

/// E[(Z - d)_+] <= E[(Y - d)_+] + tol for every d. Both sides are piecewise
/// linear with kinks at support points, so those points suffice.
inline bool stop_loss_leq(const GridVariable& z, const GridVariable& y, double tol) {
  for (double d : detail::support_union(z, y))
    if (z.stop_loss(d) > y.stop_loss(d) + tol) return false;
  return true;
}

/// Z <=_cx Y: equal means within tol and the stop-loss inequality.
inline bool convex_order_leq(const GridVariable& z, const GridVariable& y, double tol) {
  if (std::abs(z.mean() - y.mean()) > tol) return false;
  return stop_loss_leq(z, y, tol);
}

/// Z1 has less downside risk than Z2 (third-degree dominance at equal mean
/// and variance): E[((x - Z2)_+)^2] - E[((x - Z1)_+)^2] >= 0 for every x.
/// The difference is piecewise quadratic between support points, so it is
/// checked at those points and at each piece's vertex.
inline bool less_downside_risk(const GridVariable& z1, const GridVariable& z2, double rel_tol = 1e-9) {
  const double m1 = z1.mean();
  const double m2 = z2.mean();
  const double v1 = z1.variance();
  const double v2 = z2.variance();
  const double mean_scale = std::max(1.0, std::sqrt(std::max(v1, v2)));
  const double var_scale = std::max(1.0, std::max(v1, v2));
  if (std::abs(m1 - m2) > 1e-6 * mean_scale || std::abs(v1 - v2) > 1e-6 * var_scale)
    throw PreconditionError("downside-risk comparison needs equal means and variances (means " +
                            std::to_string(m1) + ", " + std::to_string(m2) + "; variances " +
                            std::to_string(v1) + ", " + std::to_string(v2) + ")");
  const double tol = rel_tol * std::max({v1, v2, std::numeric_limits<double>::min()});
  auto gap = [&](double x) { return z2.lower_partial_second(x) - z1.lower_partial_second(x); };
  const auto pts = detail::support_union(z1, z2);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (gap(pts[k]) < -tol) return false;
    if (k + 1 == pts.size()) break;
    // On (pts[k], pts[k+1]) the gap is a x^2 + b x + c with a = P2 - P1 and
    // b = -2 (S2 - S1), where P, S are the mass and first moment below x.
    double a = 0.0;
    double b = 0.0;
    const double mid = 0.5 * (pts[k] + pts[k + 1]);
    for (std::size_t i = 0; i < z2.values.size(); ++i)
      if (z2.values[i] < mid) {
        a += z2.probs[i];
        b -= 2.0 * z2.probs[i] * z2.values[i];
      }
    for (std::size_t i = 0; i < z1.values.size(); ++i)
      if (z1.values[i] < mid) {
        a -= z1.probs[i];
        b += 2.0 * z1.probs[i] * z1.values[i];
      }
    if (a > 0.0) {
      const double vertex = -b / (2.0 * a);
      if (vertex > pts[k] && vertex < pts[k + 1] && gap(vertex) < -tol) return false;
    }
  }
  return true;
}

}  // namespace vcins
