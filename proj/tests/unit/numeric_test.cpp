#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "tailmes/numeric.hpp"

using namespace tailmes::numeric;

TEST(NelderMead, Rosenbrock) {
  auto f = [](const std::vector<double>& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  const SimplexResult r = nelder_mead(f, {-1.2, 1.0}, {0.5, 0.5});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
}

TEST(NelderMead, NonFiniteTreatedAsInfinity) {
  auto f = [](const std::vector<double>& x) { return x[0] < 0 ? std::nan("") : (x[0] - 2) * (x[0] - 2); };
  const SimplexResult r = nelder_mead(f, {0.5}, {1.0});
  EXPECT_NEAR(r.x[0], 2.0, 1e-4);
}

TEST(BrentMinimize, Parabola) {
  const Brent1dResult r = brent_minimize([](double x) { return std::cosh(x - 0.3); }, -2.0, 3.0);
  EXPECT_NEAR(r.x, 0.3, 1e-7);
}

TEST(HalfLineRule, AlgebraicIntegrands) {
  const HalfLineRule rule(1.0 / 32.0);
  EXPECT_NEAR(rule.integrate([](double x) { return 1.0 / (1.0 + x * x); }), std::numbers::pi / 2, 1e-10);
  EXPECT_NEAR(rule.integrate([](double x) { return std::pow(x, -0.5) / (1.0 + x); }), std::numbers::pi, 1e-9);
}

TEST(UnitIntervalRule, EndpointSingularities) {
  const UnitIntervalRule rule(1.0 / 16.0);
  EXPECT_NEAR(rule.integrate([](double x, double) { return std::log(x); }), -1.0, 1e-12);
  EXPECT_NEAR(rule.integrate([](double, double c) { return std::pow(c, -0.5); }), 2.0, 1e-8);
  for (std::size_t i = 0; i < rule.nodes().size(); ++i)
    EXPECT_NEAR(rule.nodes()[i] + rule.complements()[i], 1.0, 1e-15);
}

TEST(ParallelFor, CoversRangeAndRethrows) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(100, 3,
                            [](std::size_t i) {
                              if (i == 42) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
  EXPECT_GE(resolve_threads(0), 1u);
  EXPECT_EQ(resolve_threads(5), 5u);
}
