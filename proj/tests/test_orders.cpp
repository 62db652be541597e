#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace vcins;
using Catch::Approx;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

}  // namespace

TEST_CASE("crossing counts") {
  const auto x = linspace(0.0, 1.0, 1001);
  std::vector<double> zero(x.size(), 0.0);
  std::vector<double> lin(x.size());
  std::vector<double> bump(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    lin[i] = x[i] - 0.5;
    bump[i] = -(x[i] - 0.25) * (x[i] - 0.75);
  }
  const auto one = upcross_count(x, lin, zero, 1e-9);
  CHECK(one.count == 1);
  CHECK(one.locations[0] == Approx(0.5).margin(1e-12));
  CHECK(one.direction_first == 1);

  const auto none = upcross_count(x, lin, lin, 1e-9);
  CHECK(none.count == 0);
  CHECK(none.direction_first == 0);

  const auto two = upcross_count(x, bump, zero, 1e-9);
  REQUIRE(two.count == 2);
  CHECK(two.locations[0] == Approx(0.25).margin(1e-6));
  CHECK(two.locations[1] == Approx(0.75).margin(1e-6));
  CHECK(two.direction_first == 1);

  // Tangential contact is not a crossing.
  std::vector<double> touch(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) touch[i] = (x[i] - 0.5) * (x[i] - 0.5);
  CHECK(upcross_count(x, touch, zero, 1e-9).count == 0);

  CHECK_THROWS_AS(upcross_count(x, lin, std::vector<double>(3, 0.0), 1e-9), PreconditionError);
}

TEST_CASE("convex order basics") {
  const GridVariable y{{0.0, 1.0, 4.0}, {0.5, 0.3, 0.2}};
  const GridVariable c{{y.mean()}, {1.0}};
  CHECK(convex_order_leq(c, y, 1e-12));
  CHECK_FALSE(convex_order_leq(y, c, 1e-12));
  CHECK(convex_order_leq(y, y, 1e-12));
  const GridVariable shifted{{1.0, 2.0, 5.0}, {0.5, 0.3, 0.2}};
  CHECK_FALSE(convex_order_leq(y, shifted, 1e-12));
  CHECK(stop_loss_leq(y, shifted, 1e-12));
}

TEST_CASE("capped loss is convex-smaller than any feasible indemnity of equal mean") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto m = testing::exponential_grid(0.7, 4.0, 201, 0.2);
  const auto x = m.nodes();
  const auto w = m.weights();
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> h(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) h[i] = unit(rng) * x[i];
    const double target = m.mean_of(h);
    const double d = roots::bisect_inf([&](double k) { return m.cap_mean(k) >= target; }, 0.0,
                                       m.support_max(), 0.0);
    std::vector<double> cap(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) cap[i] = std::min(x[i], d);
    CHECK(convex_order_leq(transform(cap, w), transform(h, w), 1e-9));
  }
}

TEST_CASE("downside risk on a three-point skew pair") {
  // Z1 is right-skewed, Z2 = -Z1 left-skewed; equal mean 0 and variance 1.2.
  const GridVariable z1{{-1.0, 0.0, 3.0}, {0.3, 0.6, 0.1}};
  const GridVariable z2{{1.0, 0.0, -3.0}, {0.3, 0.6, 0.1}};
  CHECK(z1.mean() == Approx(0.0).margin(1e-15));
  CHECK(z1.variance() == Approx(z2.variance()));
  CHECK(testing::downside_by_trapezoids(z1, z2));
  CHECK_FALSE(testing::downside_by_trapezoids(z2, z1));
  CHECK(less_downside_risk(z1, z2));
  CHECK_FALSE(less_downside_risk(z2, z1));
  CHECK(less_downside_risk(z1, z1));
  const GridVariable wider{{-2.0, 2.0}, {0.5, 0.5}};
  CHECK_THROWS_AS(less_downside_risk(z1, wider), PreconditionError);
}

TEST_CASE("exact downside check agrees with cumulative trapezoids on random pairs") {
  // Equal mean and variance: Z2 = a + b * V2 standardised to Z1's moments.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int agreements = 0;
  for (int trial = 0; trial < 30; ++trial) {
    auto draw = [&] {
      GridVariable z;
      double total = 0.0;
      for (int i = 0; i < 4; ++i) {
        z.values.push_back(4.0 * unit(rng) - 2.0);
        z.probs.push_back(0.1 + unit(rng));
        total += z.probs.back();
      }
      for (double& p : z.probs) p /= total;
      const double m = z.mean();
      const double s = std::sqrt(z.variance());
      for (double& v : z.values) v = (v - m) / s;
      return z;
    };
    const auto a = draw();
    const auto b = draw();
    const bool exact = less_downside_risk(a, b);
    const bool trap = testing::downside_by_trapezoids(a, b, 40000, 2e-3);
    // Disagreement is only possible inside the quadrature tolerance band.
    if (exact == trap) ++agreements;
    if (exact) CHECK(trap);
  }
  CHECK(agreements >= 28);
}
