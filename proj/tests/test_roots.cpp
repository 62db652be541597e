#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <tuple>

#include "vcins/roots.hpp"

using namespace vcins;
using Catch::Approx;

TEST_CASE("bisection on monotone predicates") {
  const double s = roots::bisect_sup([](double x) { return x * x <= 2.0; }, 0.0, 2.0, 1e-12);
  CHECK(s == Approx(std::sqrt(2.0)).margin(1e-12));
  CHECK(s * s <= 2.0);
  const double i = roots::bisect_inf([](double x) { return x * x >= 2.0; }, 0.0, 2.0, 0.0);
  CHECK(i * i >= 2.0);
  CHECK(i == Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("TOMS 748 bracketed solve") {
  auto f = [](double x) { return x * x * x - 2 * x - 5; };  // root near 2.0945514815
  const auto r = roots::solve_bracketed(f, 2.0, 3.0, f(2.0), f(3.0), 1e-14);
  CHECK(r.best() == Approx(2.0945514815423265).epsilon(1e-13));
  CHECK(r.best_residual() < 1e-12);
  CHECK(r.iterations > 0);
  CHECK_THROWS_AS(roots::solve_bracketed(f, 3.0, 4.0, f(3.0), f(4.0), 1e-14), SolverError);
  const auto exact = roots::solve_bracketed(f, 2.0, 3.0, 0.0, f(3.0), 1e-14);
  CHECK(exact.best() == 2.0);
}

TEST_CASE("scale floor keeps the tolerance meaningful near zero") {
  auto f = [](double x) { return x - 1e-3; };
  const auto r = roots::solve_bracketed(f, -1.0, 1.0, f(-1.0), f(1.0), 1e-12, 200, 1.0);
  CHECK(r.best() == Approx(1e-3).margin(1e-11));
}

TEST_CASE("safeguarded Newton") {
  auto fdf = [](double x) { return std::make_tuple(std::exp(x) - 3.0, std::exp(x)); };
  CHECK(roots::safeguarded_newton(fdf, 0.0, 5.0, 4.9, 1e-13) == Approx(std::log(3.0)).margin(1e-12));
  // A poor starting point still converges inside the bracket.
  auto flat = [](double x) { return std::make_tuple(std::atan(x - 1.0), 1.0 / (1.0 + (x - 1.0) * (x - 1.0))); };
  CHECK(roots::safeguarded_newton(flat, -20.0, 30.0, 29.0, 1e-12) == Approx(1.0).margin(1e-10));
  CHECK_THROWS_AS(roots::safeguarded_newton(fdf, 2.0, 5.0, 3.0, 1e-12), SolverError);
}
