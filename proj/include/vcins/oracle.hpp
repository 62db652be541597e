#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "vcins/arrow.hpp"
#include "vcins/bounds.hpp"
#include "vcins/problem.hpp"

// Brute-force certification of the discretized problem. The schedule is
// parametrised by its slopes on the grid intervals, so incentive
// compatibility is the box [0,1]^n and projection is a clamp. The variance
// bound is handled by an augmented Lagrangian. Subproblems use a two-metric
// projected Newton method (Bertsekas 1982): scaled gradient steps on the
// epsilon-active bounds, Newton steps on the free slopes.
//
// In level space the Hessian is diag(a) + V M V^T with three columns in V.
// Restricted to free slopes, the diagonal part becomes a tail-sum matrix
// K_jl = T_max(j,l), whose inverse is bidiagonal, so each Newton step is O(n)
// with a 3x3 Woodbury correction.
namespace vcins {

struct OracleResult {
  std::vector<double> schedule;
  double objective = 0.0;        // expected utility
  bool active_variance = false;  // multiplier positive at the end
  std::size_t iterations = 0;    // total inner iterations
  double kkt_residual = 0.0;     // max of projected-gradient and constraint residuals
  double multiplier = 0.0;       // variance multiplier in utility units (comparable to beta*)
  bool converged = false;
};

namespace detail {

using Mat3 = std::array<std::array<double, 3>, 3>;

/// Solves the 3x3 system A z = r by Gaussian elimination with partial pivoting.
inline std::array<double, 3> solve3(Mat3 a, std::array<double, 3> r) {
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int i = c + 1; i < 3; ++i)
      if (std::abs(a[i][c]) > std::abs(a[piv][c])) piv = i;
    std::swap(a[c], a[piv]);
    std::swap(r[c], r[piv]);
    if (a[c][c] == 0.0) continue;
    for (int i = c + 1; i < 3; ++i) {
      const double f = a[i][c] / a[c][c];
      for (int j = c; j < 3; ++j) a[i][j] -= f * a[c][j];
      r[i] -= f * r[c];
    }
  }
  std::array<double, 3> z{};
  for (int i = 2; i >= 0; --i) {
    double s = r[i];
    for (int j = i + 1; j < 3; ++j) s -= a[i][j] * z[j];
    z[i] = a[i][i] != 0.0 ? s / a[i][i] : 0.0;
  }
  return z;
}

class SlopeProgram {
 public:
  SlopeProgram(const Problem& p, double u_scale) : p_(p), u_scale_(u_scale) {
    const auto nodes = p.measure.nodes();
    const auto w = p.measure.weights();
    n_ = nodes.size();
    dx_.resize(n_);
    tail_.resize(n_);
    double prev = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      dx_[i] = nodes[i] - prev;
      prev = nodes[i];
    }
    double acc = 0.0;
    for (std::size_t i = n_; i-- > 0;) {
      acc += w[i];
      tail_[i] = acc;
    }
  }

  std::size_t size() const { return n_; }
  double dx(std::size_t k) const { return dx_[k]; }
  bool free(std::size_t k) const { return dx_[k] > 0.0 && tail_[k] > 0.0; }

  std::vector<double> levels(const std::vector<double>& s) const {
    std::vector<double> lv(n_);
    double acc = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      acc += s[i] * dx_[i];
      lv[i] = acc;
    }
    return lv;
  }

  /// Scaled constraint (var[I] - nu) / nu.
  double constraint(const std::vector<double>& lv) const {
    return (p_.measure.variance_of(lv) - p_.nu) / p_.nu;
  }

  /// Augmented-Lagrangian value, minimised.
  double value(const std::vector<double>& s, double lambda, double mu) const {
    const auto lv = levels(s);
    const double g = constraint(lv);
    const double shifted = std::max(0.0, lambda + mu * g);
    return -expected_utility(p_, lv) / u_scale_ + (shifted * shifted - lambda * lambda) / (2.0 * mu);
  }

  /// Slope gradient, plus the level-space Hessian pieces when `newton` is set.
  void derivatives(const std::vector<double>& s, double lambda, double mu, std::vector<double>& grad,
                   std::vector<double>* diag, std::array<std::vector<double>, 3>* cols,
                   Mat3* core) const {
    const auto lv = levels(s);
    const auto nodes = p_.measure.nodes();
    const auto w = p_.measure.weights();
    const double mean = p_.measure.mean_of(lv);
    const double c = 1.0 + p_.rho;
    std::vector<double> mu_w(n_);
    std::vector<double> curv(n_);
    double mean_mu = 0.0;
    double total_curv = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const double wealth = p_.w0 - nodes[i] + lv[i] - c * mean;
      mu_w[i] = p_.utility.mu(wealth) / u_scale_;
      curv[i] = w[i] * -p_.utility.ddu(wealth) / u_scale_;
      mean_mu += w[i] * mu_w[i];
      total_curv += curv[i];
    }
    const double g = constraint(lv);
    const double shifted = std::max(0.0, lambda + mu * g);
    grad.assign(n_, 0.0);
    double acc = 0.0;
    for (std::size_t i = n_; i-- > 0;) {
      const double d_obj = -w[i] * (mu_w[i] - c * mean_mu);
      const double d_con = shifted * 2.0 * w[i] * (lv[i] - mean) / p_.nu;
      acc += d_obj + d_con;
      grad[i] = acc * dx_[i];
    }
    if (!diag) return;
    // -E[U] contributes diag(q) - c (q p' + p q') + c^2 Q p p' with q = p |U''|.
    // The penalty adds mu h h' + shifted (2/nu)(diag(p) - p p') when active.
    diag->assign(n_, 0.0);
    for (auto& col : *cols) col.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      (*diag)[i] = curv[i] + shifted * 2.0 * w[i] / p_.nu;
      (*cols)[0][i] = w[i];
      (*cols)[1][i] = curv[i];
      (*cols)[2][i] = 2.0 * w[i] * (lv[i] - mean) / p_.nu;
    }
    *core = Mat3{};
    (*core)[0][0] = c * c * total_curv - shifted * 2.0 / p_.nu;
    (*core)[0][1] = (*core)[1][0] = -c;
    (*core)[2][2] = shifted > 0.0 ? mu : 0.0;
  }

  /// Gradient per unit of conditional tail mass: g_k / (dx_k * tail_k).
  double scaled(const std::vector<double>& grad, std::size_t k) const {
    return grad[k] / (dx_[k] * tail_[k]);
  }

  /// Max over free slopes of |s - clamp(s - scaled gradient)|.
  double projected_gradient_norm(const std::vector<double>& s, const std::vector<double>& grad) const {
    double r = 0.0;
    for (std::size_t k = 0; k < n_; ++k) {
      if (!free(k)) continue;
      r = std::max(r, std::abs(s[k] - std::clamp(s[k] - scaled(grad, k), 0.0, 1.0)));
    }
    return r;
  }

 private:
  const Problem& p_;
  double u_scale_;
  std::size_t n_ = 0;
  std::vector<double> dx_;
  std::vector<double> tail_;
};

/// Newton direction -H_FF^{-1} g_F for the free slopes F (ascending indices).
inline std::vector<double> reduced_newton(const SlopeProgram& prog, const std::vector<std::size_t>& idx,
                                          const std::vector<double>& grad, const std::vector<double>& diag,
                                          const std::array<std::vector<double>, 3>& cols,
                                          const Mat3& core) {
  const std::size_t m = idx.size();
  const std::size_t n = prog.size();
  // Tail sums of diag and of each column from every free index.
  std::vector<double> t_diag(m);
  std::array<std::vector<double>, 3> t_col;
  for (auto& t : t_col) t.assign(m, 0.0);
  {
    double acc = 0.0;
    std::array<double, 3> acc_c{};
    std::size_t i = n;
    for (std::size_t j = m; j-- > 0;) {
      while (i > idx[j]) {
        --i;
        acc += diag[i];
        for (int r = 0; r < 3; ++r) acc_c[r] += cols[r][i];
      }
      t_diag[j] = acc;
      for (int r = 0; r < 3; ++r) t_col[r][j] = acc_c[r];
    }
  }
  std::vector<double> block(m);
  const double floor = 1e-300;
  for (std::size_t j = 0; j < m; ++j)
    block[j] = std::max(t_diag[j] - (j + 1 < m ? t_diag[j + 1] : 0.0), floor);

  // B = Dx K Dx with K_jl = t_diag[max(j,l)]; K^{-1} = L^{-1} diag(1/block) L^{-T}.
  auto solve_b = [&](const std::vector<double>& rhs) {
    std::vector<double> y(m);
    for (std::size_t j = 0; j < m; ++j) y[j] = rhs[j] / prog.dx(idx[j]);
    std::vector<double> v(m);
    for (std::size_t j = 0; j < m; ++j) v[j] = (y[j] - (j + 1 < m ? y[j + 1] : 0.0)) / block[j];
    std::vector<double> z(m);
    for (std::size_t j = 0; j < m; ++j) z[j] = v[j] - (j > 0 ? v[j - 1] : 0.0);
    for (std::size_t j = 0; j < m; ++j) z[j] /= prog.dx(idx[j]);
    return z;
  };

  std::vector<double> g_f(m);
  for (std::size_t j = 0; j < m; ++j) g_f[j] = grad[idx[j]];
  std::array<std::vector<double>, 3> u;
  std::array<std::vector<double>, 3> binv_u;
  for (int r = 0; r < 3; ++r) {
    u[r].resize(m);
    for (std::size_t j = 0; j < m; ++j) u[r][j] = prog.dx(idx[j]) * t_col[r][j];
    binv_u[r] = solve_b(u[r]);
  }
  const auto binv_g = solve_b(g_f);
  // (B + U M U')^{-1} g = B^{-1} g - B^{-1} U (I + M U' B^{-1} U)^{-1} M U' B^{-1} g.
  Mat3 utbu{};
  std::array<double, 3> utbg{};
  for (int r = 0; r < 3; ++r) {
    for (int q = 0; q < 3; ++q) {
      double s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += u[r][j] * binv_u[q][j];
      utbu[r][q] = s;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) s += u[r][j] * binv_g[j];
    utbg[r] = s;
  }
  Mat3 cap{};
  std::array<double, 3> rhs{};
  for (int r = 0; r < 3; ++r) {
    for (int q = 0; q < 3; ++q) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += core[r][k] * utbu[k][q];
      cap[r][q] = (r == q ? 1.0 : 0.0) + s;
    }
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += core[r][k] * utbg[k];
    rhs[r] = s;
  }
  const auto coef = solve3(cap, rhs);
  std::vector<double> d(m);
  for (std::size_t j = 0; j < m; ++j) {
    double corr = 0.0;
    for (int r = 0; r < 3; ++r) corr += binv_u[r][j] * coef[r];
    d[j] = -(binv_g[j] - corr);
  }
  return d;
}

struct InnerOutcome {
  std::size_t iterations = 0;
  double pg_norm = 0.0;
};

inline InnerOutcome projected_newton(const SlopeProgram& prog, std::vector<double>& s, double lambda,
                                     double mu, double pg_tol, std::size_t budget) {
  const std::size_t n = prog.size();
  std::vector<double> grad;
  std::vector<double> diag;
  std::array<std::vector<double>, 3> cols;
  Mat3 core{};
  InnerOutcome out;
  constexpr double kArmijo = 1e-4;
  constexpr double kEpsMax = 1e-2;
  for (std::size_t it = 0; it < budget; ++it) {
    prog.derivatives(s, lambda, mu, grad, &diag, &cols, &core);
    out.pg_norm = prog.projected_gradient_norm(s, grad);
    if (out.pg_norm < pg_tol) break;
    ++out.iterations;

    const double eps = std::min(kEpsMax, out.pg_norm);
    std::vector<std::size_t> free_idx;
    std::vector<double> dir(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      if (!prog.free(k)) continue;
      const double r = prog.scaled(grad, k);
      const bool at_lo = s[k] <= eps && r > 0.0;
      const bool at_hi = s[k] >= 1.0 - eps && r < 0.0;
      if (at_lo || at_hi) dir[k] = -r;
      else free_idx.push_back(k);
    }
    if (!free_idx.empty()) {
      const auto d = reduced_newton(prog, free_idx, grad, diag, cols, core);
      for (std::size_t j = 0; j < free_idx.size(); ++j) dir[free_idx[j]] = d[j];
    }

    const double f0 = prog.value(s, lambda, mu);
    std::vector<double> trial(n);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      double predicted = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        trial[k] = prog.free(k) ? std::clamp(s[k] + alpha * dir[k], 0.0, 1.0) : s[k];
        predicted += grad[k] * (s[k] - trial[k]);
      }
      const double f1 = prog.value(trial, lambda, mu);
      // Below roundoff the model decrease cannot be resolved; take the step.
      const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f0));
      if (f0 - f1 >= kArmijo * predicted || (predicted < noise && f1 <= f0 + noise)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    s = trial;
  }
  return out;
}

}  // namespace detail

/// Maximises E[U(w0 - X + I - (1+rho) E[I])] over discrete incentive-
/// compatible schedules with var[I] <= nu. Deterministic: the starting point
/// is the stop-loss at d_L (or at d* when the bound is slack).
inline OracleResult brute_solve(const Problem& p, const SolverOptions& opts = {}) {
  if (auto problems = validate(p); !problems.empty()) throw ValidationError(std::move(problems));
  if (p.measure.size() > 1001) throw PreconditionError("brute_solve is limited to grids of at most 1001 nodes");

  const auto arrow = arrow_deductible(p, opts);
  const double start_d =
      is_variance_slack(arrow, p.nu) ? arrow.d_star : compute_bracket(p.measure, arrow, p.nu).d_L;
  const auto nodes = p.measure.nodes();
  const std::size_t n = nodes.size();

  const double u_scale = p.utility.mu(p.w0 - (1.0 + p.rho) * p.measure.mean());
  detail::SlopeProgram prog(p, u_scale);

  // Slopes of (x - d)_+; the interval holding the kink gets its fractional part.
  std::vector<double> s(n, 0.0);
  double prev = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (prog.free(k)) {
      const double covered = std::clamp(nodes[k] - std::max(prev, start_d), 0.0, prog.dx(k));
      s[k] = covered / prog.dx(k);
    }
    prev = nodes[k];
  }

  OracleResult out;
  double lambda = 0.0;
  double mu = 10.0;
  double last_violation = std::numeric_limits<double>::infinity();
  const double feas_tol = 1e-12;
  std::size_t remaining = opts.oracle_max_iter;
  constexpr int kMaxOuter = 100;
  for (int outer = 0; outer < kMaxOuter && remaining > 0; ++outer) {
    const auto inner = detail::projected_newton(prog, s, lambda, mu, opts.oracle_pg_tol, remaining);
    remaining -= std::min(remaining, inner.iterations);
    out.iterations += inner.iterations;
    const double g = prog.constraint(prog.levels(s));
    // Complementarity residual for g <= 0, lambda >= 0.
    const double violation = std::abs(std::max(g, -lambda / mu));
    lambda = std::max(0.0, lambda + mu * g);
    out.kkt_residual = std::max(inner.pg_norm, violation);
    if (inner.pg_norm < opts.oracle_pg_tol && violation <= feas_tol) {
      out.converged = true;
      break;
    }
    if (violation > 0.25 * last_violation) mu *= 4.0;
    last_violation = violation;
  }

  out.schedule = prog.levels(s);
  out.objective = expected_utility(p, out.schedule);
  out.active_variance = lambda > 0.0;
  // The scaled multiplier converts back to d(E U)/d(var).
  out.multiplier = lambda * u_scale / p.nu;
  return out;
}

}  // namespace vcins
