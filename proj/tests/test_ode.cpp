#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "qiso/ode.hpp"

using namespace qiso;
using std::numbers::pi;

TEST(SolveIvp, FreeSineAtFirstEigenvalue) {
  const auto u = solve_ivp(Potential(), pi * pi, 0.0, 1.0);
  EXPECT_NEAR(u.value(1.0), 0.0, 1e-10);
  EXPECT_NEAR(u.slope(1.0), -1.0, 1e-10);
  for (double x : {0.1, 0.33, 0.5, 0.9}) {
    EXPECT_NEAR(u.value(x), std::sin(pi * x) / pi, 1e-12);
    EXPECT_NEAR(u.slope(x), std::cos(pi * x), 1e-12);
  }
}

TEST(SolveIvp, ConstantSolution) {
  const auto u = solve_ivp(Potential(), 0.0, 1.0, 0.0);
  for (double x : {0.0, 0.4, 1.0}) {
    EXPECT_EQ(u.value(x), 1.0);
    EXPECT_EQ(u.slope(x), 0.0);
  }
}

TEST(SolveIvp, LinearSolutionWhenLambdaEqualsConstant) {
  const auto u = solve_ivp(Potential::constant(3.7), 3.7, 0.0, 1.0);
  for (int i = 0; i <= 20; ++i) EXPECT_NEAR(u.value(i / 20.0), i / 20.0, 1e-11);
}

TEST(SolveIvp, NegativeLambda) {
  const auto u = solve_ivp(Potential(), -4.0, 1.0, 0.0);
  EXPECT_NEAR(u.value(1.0), std::cosh(2.0), 1e-12 * std::cosh(2.0));
  EXPECT_NEAR(u.slope(1.0), 2.0 * std::sinh(2.0), 1e-12 * std::cosh(2.0));
}

TEST(SolveIvp, LargeLambdaUsesPhaseVariables) {
  const double lambda = 2.0e4;
  const double k = std::sqrt(lambda);
  const auto u = solve_ivp(Potential(), lambda, 0.0, 1.0);
  EXPECT_TRUE(u.uses_prufer());
  for (double x : {0.2, 0.55, 1.0}) {
    EXPECT_NEAR(u.value(x), std::sin(k * x) / k, 1e-11);
    EXPECT_NEAR(u.slope(x), std::cos(k * x), 1e-9);
  }
  EXPECT_FALSE(solve_ivp(Potential(), 100.0, 0.0, 1.0).uses_prufer());
}

TEST(SolveIvp, RejectsTrivialData) { EXPECT_THROW(solve_ivp(Potential(), 1.0, 0.0, 0.0), InvalidArgument); }

TEST(SolveIvp, GridCoversUnitInterval) {
  const auto u = solve_ivp(parse_potential("10*cos(3*x)"), 50.0, 0.0, 1.0);
  const auto g = u.grid();
  ASSERT_GE(g.size(), 3u);
  EXPECT_EQ(g.front(), 0.0);
  EXPECT_EQ(g.back(), 1.0);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
  EXPECT_EQ(u.u_values().size(), g.size());
  // (u, u') never vanish together
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_GT(std::hypot(u.u_values()[i], u.du_values()[i]), 1e-3);
  }
}

TEST(SolveIvp, ScaledCopy) {
  const auto u = solve_ivp(Potential(), pi * pi, 0.0, 1.0);
  const auto v = u.scaled(-2.0);
  EXPECT_DOUBLE_EQ(v.value(0.3), -2.0 * u.value(0.3));
  EXPECT_DOUBLE_EQ(v.slope(0.3), -2.0 * u.slope(0.3));
}

TEST(SolveIvp, ErrorShrinksWithStepCountAtHighOrder) {
  // Global error of a 5(4) pair behaves like N^-5 in the number of steps.
  const double k = std::sqrt(200.0);
  auto run = [&](double rtol) {
    Tolerances tol;
    tol.rtol = rtol;
    tol.atol = rtol * 1e-2;
    const auto u = solve_ivp(Potential(), 200.0, 0.0, 1.0, tol);
    return std::pair<double, double>{std::abs(u.value(1.0) - std::sin(k) / k),
                                     static_cast<double>(u.step_count())};
  };
  const auto [e1, n1] = run(1e-6);
  const auto [e2, n2] = run(1e-9);
  ASSERT_GT(n2, n1);
  EXPECT_LT(e2, e1);
  EXPECT_GT(std::log(e1 / e2) / std::log(n2 / n1), 4.0);
}

TEST(FundamentalPair, FreeCases) {
  const auto [c, s] = fundamental_pair(Potential(), 1.0);
  const auto [ch, sh] = fundamental_pair(Potential(), -1.0);
  for (double x : {0.0, 0.3, 0.8, 1.0}) {
    EXPECT_NEAR(c.value(x), std::cos(x), 1e-12);
    EXPECT_NEAR(s.value(x), std::sin(x), 1e-12);
    EXPECT_NEAR(ch.value(x), std::cosh(x), 1e-12);
    EXPECT_NEAR(sh.value(x), std::sinh(x), 1e-12);
  }
}

TEST(Wronskian, UnitForFundamentalPair) {
  const auto q = parse_potential("8*sin(5*x)+x^2");
  for (double lambda : {-30.0, 0.0, 17.0, 400.0}) {
    const auto [y1, y2] = fundamental_pair(q, lambda);
    const auto w = wronskian(y1, y2);
    for (int i = 0; i < 64; ++i) {
      // cancellation: the error scales with the size of the two products
      const double x = i / 63.0;
      const double size = std::abs(y1.value(x) * y2.slope(x)) + std::abs(y1.slope(x) * y2.value(x));
      EXPECT_NEAR(w(x), 1.0, 1e-11 * size) << "lambda=" << lambda;
    }
  }
}

TEST(Wronskian, Antisymmetry) {
  const auto u = solve_ivp(parse_potential("exp(x)"), 12.0, 0.3, -1.0);
  const auto w = wronskian(u, u);
  for (int i = 0; i < 32; ++i) EXPECT_EQ(w(i / 31.0), 0.0);
}

TEST(Wronskian, ConstantForSameLambda) {
  const auto q = parse_potential("3*cos(2*pi*x)-1");
  const auto u = solve_ivp(q, 25.0, 1.0, 2.0);
  const auto v = solve_ivp(q, 25.0, -0.5, 0.7);
  const auto w = wronskian(u, v);
  const double w0 = w(0.0);
  for (int i = 0; i < 256; ++i) EXPECT_NEAR(w(i / 255.0), w0, 1e-10 * (1.0 + std::abs(w0)));
}

TEST(Wronskian, CrossLambdaDerivative) {
  const auto q = parse_potential("4*x*(1-x)");
  const double lambda = 10.0, mu = 23.0;
  const auto u = solve_ivp(q, lambda, 0.0, 1.0);
  const auto v = solve_ivp(q, mu, 1.0, 0.0);
  const auto w = wronskian(u, v);
  const double h = 1e-4;
  for (double x : {0.1, 0.35, 0.6, 0.85}) {
    const double fd = (w(x + h) - w(x - h)) / (2 * h);
    const double exact = (lambda - mu) * u.value(x) * v.value(x);
    EXPECT_NEAR(fd, exact, 1e-5 * std::max(1.0, std::abs(exact)));
  }
}
