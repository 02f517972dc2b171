#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "fd_oracle.hpp"
#include "qiso/spectrum.hpp"

using namespace qiso;
using std::numbers::pi;

namespace {

const double pi2 = pi * pi;
const auto dirichlet = BoundaryCondition::dirichlet();

}  // namespace

TEST(BoundaryCondition, Coefficients) {
  EXPECT_EQ(dirichlet.coefficients(), (std::array<double, 4>{1, 0, 1, 0}));
  EXPECT_EQ(BoundaryCondition::robin(2, 3).coefficients(), (std::array<double, 4>{-2, 1, 3, 1}));
  EXPECT_EQ(dirichlet.index_offset(), 1);
  EXPECT_EQ(BoundaryCondition::neumann().index_offset(), 0);
  EXPECT_THROW(BoundaryCondition::general(0, 0, 1, 0), InvalidArgument);
  EXPECT_THROW(BoundaryCondition::general(1, 0, 0, 0), InvalidArgument);
  EXPECT_NO_THROW(BoundaryCondition::general(1, 2, 3, 4));
}

TEST(CharFunction, FreeDirichletZeros) {
  for (int n = 1; n <= 5; ++n) EXPECT_NEAR(char_function(Potential(), dirichlet, n * n * pi2), 0.0, 1e-10);
  EXPECT_NEAR(char_function(Potential(), dirichlet, pi2 / 4), 2.0 / pi, 1e-10);
}

TEST(CharFunction, FreeGeneralFamilyMatchesFactorization) {
  // a = c = cos θ, b = d = sin θ: determinant (a² + b²λ) sin√λ/√λ
  const double theta = pi / 4;
  const auto bc = BoundaryCondition::cos_sin_family(theta);
  EXPECT_NEAR(char_function(Potential(), bc, -1.0), 0.0, 1e-8);
  for (double lambda : {-3.0, 0.5, 7.0, 30.0}) {
    const double a = std::cos(theta), b = std::sin(theta);
    const double s = lambda > 0 ? std::sin(std::sqrt(lambda)) / std::sqrt(lambda)
                                : std::sinh(std::sqrt(-lambda)) / std::sqrt(-lambda);
    EXPECT_NEAR(char_function(Potential(), bc, lambda), (a * a + b * b * lambda) * s, 1e-10);
  }
  // no spurious root at λ = 0: the value there is a² = cos²θ
  EXPECT_NEAR(char_function(Potential(), bc, 0.0), 0.5, 1e-12);
}

TEST(Eigenvalues, FreeDirichlet) {
  const auto s = eigenvalues(Potential(), dirichlet, 5);
  ASSERT_EQ(s.size(), 5u);
  EXPECT_EQ(s.index_offset, 1);
  for (int n = 1; n <= 5; ++n) EXPECT_NEAR(s.at(n), n * n * pi2, 1e-9);
  EXPECT_THROW(s.at(0), InvalidArgument);
  EXPECT_THROW(s.at(6), InvalidArgument);
  EXPECT_EQ(s.last_index(), 5);
}

TEST(Eigenvalues, ConstantShift) {
  const auto s = eigenvalues(Potential::constant(-6.5), dirichlet, 12);
  for (int n = 1; n <= 12; ++n) EXPECT_NEAR(s.at(n), n * n * pi2 - 6.5, 1e-9);
}

TEST(Eigenvalues, FreeNeumann) {
  const auto s = eigenvalues(Potential(), BoundaryCondition::neumann(), 4);
  EXPECT_EQ(s.index_offset, 0);
  for (int n = 0; n < 4; ++n) EXPECT_NEAR(s.at(n), n * n * pi2, 1e-9);
}

TEST(Eigenvalues, FreeRobinMatchesTranscendentalEquation) {
  // y = cos kx + (h/k) sin kx; y'(1) + H y(1) = 0 ⇔ (k² - hH) tan k = k (h + H)
  const double h = 1.0, H = 2.0;
  const auto s = eigenvalues(Potential(), BoundaryCondition::robin(h, H), 6);
  for (double lambda : s.eigenvalues) {
    const double k = std::sqrt(lambda);
    const double f = (k * k - h * H) * std::sin(k) - k * (h + H) * std::cos(k);
    EXPECT_NEAR(f, 0.0, 1e-7 * std::max(1.0, lambda));
  }
}

TEST(Eigenvalues, MatchesFiniteDifferenceOracle) {
  const auto q = parse_potential("10*sin(pi*x)");
  const auto s = eigenvalues(q, dirichlet, 20);
  const auto ref = fd::eigenvalues([&](double x) { return q(x); }, 20);
  for (int n = 1; n <= 20; ++n) EXPECT_NEAR(s.at(n), ref[n - 1], 1e-6) << "n=" << n;
}

TEST(Eigenvalues, FreeGeneralFamilyStructure) {
  for (double theta : {0.2, 0.7, 1.3}) {
    const auto s = eigenvalues(Potential(), BoundaryCondition::cos_sin_family(theta), 8);
    const double cot = std::cos(theta) / std::sin(theta);
    EXPECT_NEAR(s.at(0), -cot * cot, 1e-8);
    for (int n = 1; n < 8; ++n) EXPECT_NEAR(s.at(n), n * n * pi2, 1e-8);
  }
}

TEST(Eigenvalues, ReflectionIsospectral) {
  const auto q = parse_potential("x*(1-x)*sin(7*x)+3*x");
  const auto a = eigenvalues(q, dirichlet, 25);
  const auto b = eigenvalues(reflect(q), dirichlet, 25);
  for (int n = 1; n <= 25; ++n) EXPECT_NEAR(a.at(n), b.at(n), 2e-9);
}

TEST(Eigenvalues, SimpleAndBracketedByMinMax) {
  for (const char* text : {"50*sin(3*x)", "-50*x", "40*cos(9*x)-10"}) {
    const auto q = parse_potential(text);
    const auto s = eigenvalues(q, dirichlet, 30);
    const double bound = sup_norm(q);
    for (int n = 1; n <= 30; ++n) {
      EXPECT_LE(std::abs(s.at(n) - n * n * pi2), bound + 1e-8) << text << " n=" << n;
      if (n > 1) EXPECT_GT(s.at(n) - s.at(n - 1), 1e-6);
    }
  }
}

TEST(Eigenvalues, PruferCountCertifiesCompleteness) {
  const auto q = parse_potential("20*cos(4*pi*x)");
  const auto s = eigenvalues(q, dirichlet, 15);
  const PruferCounter counter(q, dirichlet);
  for (int n = 1; n <= 15; ++n) {
    EXPECT_EQ(counter.count_below(s.at(n) - 1e-6), n - 1);
    EXPECT_EQ(counter.count_below(s.at(n) + 1e-6), n);
  }
}

TEST(Eigenvalues, DeepIndicesUsePhaseVariables) {
  // indices past √λ > 100 run through the Prüfer-variable integrator
  const auto s = eigenvalues(Potential::constant(2.0), dirichlet, 120);
  for (int n : {1, 40, 80, 120}) EXPECT_NEAR(s.at(n), n * n * pi2 + 2.0, 1e-9 * std::max(1.0, n * n * pi2 / 1e4));
}

TEST(Eigenvalues, ThreadedSearchIsIdentical) {
  const auto q = parse_potential("5*exp(x)*sin(3*x)");
  EigenOptions par;
  par.threads = 3;
  const auto a = eigenvalues(q, dirichlet, 20);
  const auto b = eigenvalues(q, dirichlet, 20, par);
  EXPECT_EQ(a.eigenvalues, b.eigenvalues);
}

TEST(Eigenvalues, RejectsEmptyRequest) { EXPECT_THROW(eigenvalues(Potential(), dirichlet, 0), InvalidArgument); }

TEST(Eigenfunction, SlopeOneAndUnitNorm) {
  const auto z = eigenfunction(Potential(), pi2, Normalization::slope_one);
  EXPECT_NEAR(z.value(0.5), 1.0 / pi, 1e-9);
  EXPECT_NEAR(z.slope(0.0), 1.0, 1e-15);
  const auto u = eigenfunction(Potential(), pi2, Normalization::unit_l2_positive_slope);
  EXPECT_NEAR(norm_squared(u), 1.0, 1e-9);
  EXPECT_NEAR(u.value(0.25), std::sqrt(2.0) * std::sin(pi / 4), 1e-9);
  EXPECT_GT(u.slope(0.0), 0.0);
}

TEST(Eigenfunction, VanishesAtBothEnds) {
  const auto q = parse_potential("12*x^2-3*cos(5*x)");
  const auto s = eigenvalues(q, dirichlet, 6);
  for (int n = 1; n <= 6; ++n) {
    const auto z = eigenfunction(q, s.at(n), Normalization::unit_l2_positive_slope);
    EXPECT_NEAR(z.value(0.0), 0.0, 1e-8);
    EXPECT_NEAR(z.value(1.0), 0.0, 1e-8);
  }
}

TEST(Eigenfunction, RejectsNonEigenvalue) {
  try {
    eigenfunction(Potential(), 12.0);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_EQ(e.code(), "not_an_eigenvalue");
  }
}

TEST(TerminalVelocity, FreeCase) {
  for (int n = 1; n <= 6; ++n) {
    const auto tv = terminal_velocity(Potential(), n * n * pi2);
    EXPECT_NEAR(tv.velocity, n % 2 ? -1.0 : 1.0, 1e-9);
    EXPECT_NEAR(tv.kappa, 0.0, 1e-9);
  }
}

TEST(TerminalVelocity, ReflectionFlipsSign) {
  const auto q = parse_potential("6*x+sin(5*x)");
  const auto r = reflect(q);
  const auto sq = eigenvalues(q, dirichlet, 8);
  const auto sr = eigenvalues(r, dirichlet, 8);
  for (int n = 1; n <= 8; ++n) {
    const double kq = terminal_velocity(q, sq.at(n)).kappa;
    const double kr = terminal_velocity(r, sr.at(n)).kappa;
    EXPECT_GT(std::abs(kq), 1e-4);
    EXPECT_NEAR(kr, -kq, 1e-7);
  }
}

TEST(TerminalVelocity, EvenPotentialHasZeroKappa) {
  const auto s = eigenvalues(Potential::constant(4.0), dirichlet, 5);
  for (int n = 1; n <= 5; ++n) EXPECT_NEAR(terminal_velocity(Potential::constant(4.0), s.at(n)).kappa, 0.0, 1e-8);
}

TEST(SpectralCoordinates, TrivialCases) {
  const auto z = spectral_coordinates(Potential(), 6);
  EXPECT_EQ(z.C, 0.0);
  for (double b : z.b) EXPECT_NEAR(b, 0.0, 1e-8);
  const auto c = spectral_coordinates(Potential::constant(3.0), 6);
  EXPECT_NEAR(c.C, 3.0, 1e-14);
  for (double b : c.b) EXPECT_NEAR(b, 0.0, 1e-8);
  for (double k : c.kappa) EXPECT_NEAR(k, 0.0, 1e-8);
}

TEST(SpectralCoordinates, RemaindersDecay) {
  const auto sc = spectral_coordinates(parse_potential("10*sin(2*pi*x)"), 60);
  EXPECT_NEAR(sc.C, 0.0, 1e-12);
  ASSERT_EQ(sc.b.size(), 60u);
  for (int n = 1; n < 20; ++n) EXPECT_LT(std::abs(sc.b[n]), std::abs(sc.b[n - 1])) << "n=" << n + 1;
  double tail = 0.0;
  for (int n = 21; n <= 60; ++n) tail += sc.b[n - 1] * sc.b[n - 1];
  EXPECT_LT(tail, 10.0 * sc.b[19] * sc.b[19]);
}
