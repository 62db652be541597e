// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "support.hpp"

using namespace vcins;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Every solve made by the suite, for the criteria quantified over "every solve".
std::vector<ContractSolution> g_solves;

const ContractSolution& record(ContractSolution s) {
  g_solves.push_back(std::move(s));
  return g_solves.back();
}

struct Line {
  int id;
  std::string name;
  bool passed;
  std::string detail;
};

std::vector<Line> g_lines;

void report(int id, const std::string& name, bool passed, const std::string& detail) {
  g_lines.push_back({id, name, passed, detail});
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

void oracle_equivalence() {
  std::mt19937_64 rng(401);
  bool ok = true;
  double worst_ratio = 0.0;
  double slowest = 0.0;
  for (int k = 0; k < 10; ++k) {
    const auto sc = testing::random_interior(rng);
    const auto t0 = Clock::now();
    const auto& s = record(solve(sc.problem));
    const auto o = brute_solve(sc.problem);
    const double elapsed = seconds_since(t0);
    const double tol = 3.0 * sc.problem.measure.support_max() / 401.0;
    const double gap = testing::sup_gap(s.table, o.schedule);
    worst_ratio = std::max(worst_ratio, gap / tol);
    slowest = std::max(slowest, elapsed);
    ok = ok && s.interior() && o.converged && gap <= tol && elapsed < 30.0;
  }
  report(1, "oracle equivalence", ok, fmt("worst gap/tolerance %.3g, slowest certification %.3g s", worst_ratio, slowest));
}

void mossin_sweep() {
  // Fixed interior scenario: CARA(0.2), uniform loss on [0, 10].
  bool ok = true;
  std::string detail;
  for (double rho : {0.0, 0.05, 0.2}) {
    const Problem p{testing::uniform_grid(10.0), Cara{0.2}, 20.0, rho, 1.0};
    const auto& s = record(solve(p));
    const double d = s.deductible();
    const double var = p.measure.var_threshold(rho);
    if (!s.interior()) ok = false;
    else if (rho == 0.0) ok = ok && d == 0.0;
    else ok = ok && d > var && var > 0.0;
    detail += fmt("rho=%.2g: d=%.6g VaR=%.6g; ", rho, d, var);
  }
  report(4, "deductible iff loaded", ok, detail);
}

void slack_reduction() {
  bool ok = true;
  double worst = 0.0;
  for (double rho : {0.0, 0.2}) {
    Problem p{testing::exponential_grid(0.8, 4.0, 401, 0.2), Crra{2.0}, 12.0, rho, 1.0};
    const auto arrow = arrow_deductible(p);
    p.nu = arrow.var_at_d * 1.5 + 1e-3;
    const auto& s = record(solve(p));
    ok = ok && s.regime_name() == "slack-stop-loss" && s.deductible() == arrow.d_star;
    const auto x = p.measure.nodes();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double expect = rho == 0.0 ? x[i] : std::max(x[i] - arrow.d_star, 0.0);
      worst = std::max(worst, std::abs(s.table[i] - expect));
    }
    if (rho == 0.0) ok = ok && arrow.d_star == 0.0;
  }
  ok = ok && worst == 0.0;
  report(5, "slack reduction", ok, fmt("max deviation from stop-loss %.3g", worst));
}

void two_point() {
  const Problem p{testing::bernoulli(0.5, 10.0), Log{}, 30.0, 0.0, 4.0};
  const auto arrow = arrow_deductible(p);
  const auto b = compute_bracket(p.measure, arrow, p.nu);
  const auto& s = record(solve(p));
  const bool ok = s.regime_name() == "two-point" && std::abs(b.d_L - 6.0) <= 1e-10 &&
                  std::abs(b.K_U - 4.0) <= 1e-10 && std::abs(s.table.back() - 4.0) <= 1e-10 && s.table.front() == 0.0;
  report(6, "two-point degeneracy", ok, fmt("d_L=%.12g K_U=%.12g I(10)=%.12g", b.d_L, b.K_U, s.table.back()));
}

void wealth_suite() {
  const Problem base{testing::uniform_grid(1.0), Log{}, 3.0, 0.0, 0.04};
  const auto t0 = Clock::now();
  const auto r = compare_wealth(base, 3.0, 4.0);
  const double elapsed = seconds_since(t0);
  record(r.contracts.first);
  record(r.contracts.second);
  const bool ok = r.exposure_crossings.count == 2 && r.exposure_crossings.direction_first == 1 &&
                  r.mean_coverage.first < r.mean_coverage.second && r.betas.second < r.betas.first &&
                  r.downside_verdict.value_or(false) && r.all_passed() && elapsed < 10.0;
  report(8, "wealth comparison", ok,
         fmt("crossings %.0f, E[I] %.6g -> ", static_cast<double>(r.exposure_crossings.count), r.mean_coverage.first) +
             fmt("%.6g, %.3g s", r.mean_coverage.second, elapsed));
}

void variance_suite() {
  const Problem base{testing::uniform_grid(1.0), Log{}, 3.0, 0.0, 0.02};
  const auto r = compare_variance(base, 0.02, 0.05);
  record(r.contracts.first);
  record(r.contracts.second);
  const bool below = detail::pointwise_below(base.measure, r.contracts.first.table, r.contracts.second.table);
  const bool ok = r.exposure_crossings.count == 1 && r.exposure_crossings.direction_first == 1 && below &&
                  r.convex_verdict.value_or(false) && r.all_passed();
  report(9, "variance comparison", ok,
         fmt("crossings %.0f, beta %.6g -> %.6g", static_cast<double>(r.exposure_crossings.count), r.betas.first,
             r.betas.second));
}

void extra_solves() {
  // Loaded exponential with an atom and the heavier-tailed families, so the
  // "every solve" criteria see more than the uniform base.
  record(solve(Problem{testing::exponential_grid(1.0, 5.0, 401, 0.3), Log{}, 12.0, 0.2, 0.02}));
  record(solve(Problem{discretize(ContinuousTruncatedLoss{ParetoFamily{2.5, 1.0}, 6.0, 0.2}), Hara{0.5, 1.0}, 12.0,
                       0.0, 0.2}));
  record(solve(Problem{discretize(ContinuousTruncatedLoss{LognormalFamily{0.0, 0.7}, 6.0, 0.0}), Crra{2.0}, 15.0,
                       0.1, 0.15}));
  record(solve(Problem{testing::bernoulli(0.3, 5.0), Crra{2.0}, 20.0, 0.0, 0.84}));
}

void every_solve_criteria() {
  std::size_t interior = 0;
  std::size_t prudent = 0;
  bool moments = true;
  bool ic = true;
  bool kkt = true;
  bool vajda = true;
  double worst_kkt = 0.0;
  for (const auto& s : g_solves) {
    const auto& p = s.problem;
    ic = ic && check_incentive_compatible(s).passed();
    if (s.interior()) {
      ++interior;
      const double m = s.regime_name() == "interior-fair" ? std::get<InteriorFair>(s.regime).m_star
                                                          : std::get<InteriorLoaded>(s.regime).m_star;
      moments = moments && std::abs(s.expected_indemnity() - m) <= 1e-8 * p.measure.mean() &&
                std::abs(s.indemnity_variance() - p.nu) <= 1e-8 * p.nu;
      const auto k = certify_kkt(s);
      kkt = kkt && k.passed;
      worst_kkt = std::max(worst_kkt, k.max_abs_phi_coinsurance / k.scale);
    }
    if (p.utility.is_prudent()) {
      ++prudent;
      vajda = vajda && vajda_ratio(s);
    }
  }
  const auto n = static_cast<double>(g_solves.size());
  report(2, "binding moments", moments, fmt("%.0f interior solves", static_cast<double>(interior)));
  report(3, "incentive compatibility", ic, fmt("%.0f solves across all regimes", n));
  report(7, "KKT certification", kkt, fmt("%.0f interior solves, worst |Phi|/E[U'] %.3g", static_cast<double>(interior), worst_kkt));
  report(10, "Vajda ratio", vajda, fmt("%.0f prudent-utility solves", static_cast<double>(prudent)));
}

void appendix_validators() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto m = testing::exponential_grid(1.3, 3.0, 201, 0.25);
  const auto w = m.weights();
  int kn = 0;
  int ohlin = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = testing::random_increasing(rng, m.nodes());
    const double b = 0.1 + unit(rng);
    const double d = b * (1.05 + unit(rng));
    const double a = 2.0 * unit(rng) - 1.0;
    const double c = a + (b - d) * m.mean_of(v) + 0.5 * unit(rng);
    std::vector<double> z(v.size());
    std::vector<double> y(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      z[i] = a + b * v[i];
      y[i] = c + d * v[i];
    }
    kn += stop_loss_leq(transform(z, w), transform(y, w), 1e-12);

    const auto h2 = testing::random_increasing(rng, m.nodes());
    const auto g = testing::random_increasing(rng, m.nodes());
    const double k = 0.05 + unit(rng);
    const double mg = m.mean_of(g);
    std::vector<double> h1(h2.size());
    for (std::size_t i = 0; i < h1.size(); ++i) h1[i] = h2[i] + k * (g[i] - mg);
    ohlin += convex_order_leq(transform(h2, w), transform(h1, w), 1e-10);
  }
  report(11, "Ohlin and Karlin-Novikoff", kn == 20 && ohlin == 20,
         fmt("Karlin-Novikoff %.0f/20, Ohlin %.0f/20", kn, ohlin));
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> stages{oracle_equivalence, mossin_sweep, slack_reduction, two_point,
                                                  wealth_suite,       variance_suite, extra_solves,
                                                  every_solve_criteria, appendix_validators};
  for (const auto& stage : stages) {
    try {
      stage();
    } catch (const std::exception& e) {
      std::printf("stage raised: %s\n", e.what());
    }
  }
  std::sort(g_lines.begin(), g_lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  int failures = 0;
  for (const auto& l : g_lines) {
    std::printf("[%s] %2d %s: %s\n", l.passed ? "PASS" : "FAIL", l.id, l.name.c_str(), l.detail.c_str());
    failures += !l.passed;
  }
  // A stage that threw leaves its criterion without a line.
  failures += 11 - static_cast<int>(g_lines.size());
  std::printf("%d/11 criteria passed\n", 11 - failures);
  return failures == 0 ? 0 : 1;
}
