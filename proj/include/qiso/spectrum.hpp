#pragma once

// Sturm-Liouville spectra on [0,1]: characteristic functions, Prüfer-angle
// eigenvalue counting, bracketed root refinement, eigenfunctions, terminal
// velocities and the coordinates (C, b_n, κ_n).

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <future>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qiso/error.hpp"
#include "qiso/ode.hpp"
#include "qiso/potential.hpp"

namespace qiso {

enum class BcKind { dirichlet, robin, general };

inline const char* to_string(BcKind k) {
  switch (k) {
    case BcKind::dirichlet: return "dirichlet";
    case BcKind::robin: return "robin";
    case BcKind::general: return "general";
  }
  return "?";
}

/// Endpoint conditions.
///   Dirichlet: y(0) = 0, y(1) = 0
///   Robin:     y'(0) - h y(0) = 0, y'(1) + H y(1) = 0
///   General:   a y(0) + b y'(0) = 0, c y(1) + d y'(1) = 0
struct BoundaryCondition {
  BcKind kind = BcKind::dirichlet;
  double h = 0.0, H = 0.0;
  double a = 1.0, b = 0.0, c = 1.0, d = 0.0;

  static BoundaryCondition dirichlet() { return {}; }
  static BoundaryCondition robin(double h, double H) {
    BoundaryCondition bc;
    bc.kind = BcKind::robin;
    bc.h = h;
    bc.H = H;
    return bc;
  }
  static BoundaryCondition neumann() { return robin(0.0, 0.0); }
  static BoundaryCondition general(double a, double b, double c, double d) {
    BoundaryCondition bc;
    bc.kind = BcKind::general;
    bc.a = a;
    bc.b = b;
    bc.c = c;
    bc.d = d;
    bc.validate();
    return bc;
  }
  /// The interpolating family a = c = cos θ, b = d = sin θ.
  static BoundaryCondition cos_sin_family(double theta) {
    return general(std::cos(theta), std::sin(theta), std::cos(theta), std::sin(theta));
  }

  /// Coefficients in the General form.
  std::array<double, 4> coefficients() const {
    switch (kind) {
      case BcKind::dirichlet: return {1.0, 0.0, 1.0, 0.0};
      case BcKind::robin: return {-h, 1.0, H, 1.0};
      case BcKind::general: return {a, b, c, d};
    }
    return {1.0, 0.0, 1.0, 0.0};
  }

  void validate() const {
    const auto [ca, cb, cc, cd] = coefficients();
    if ((ca == 0.0 && cb == 0.0) || (cc == 0.0 && cd == 0.0)) {
      throw InvalidArgument("boundary coefficient pairs must not both vanish at an endpoint");
    }
    for (double v : {ca, cb, cc, cd}) {
      if (!std::isfinite(v)) throw InvalidArgument("non-finite boundary coefficient");
    }
  }

  /// First eigenvalue index: 1 for Dirichlet, 0 otherwise (Neumann-type
  /// conditions have a ground state λ_0).
  int index_offset() const { return kind == BcKind::dirichlet ? 1 : 0; }
};

/// Lowest eigenvalues for a boundary condition, strictly increasing.
struct Spectrum {
  BoundaryCondition bc;
  std::vector<double> eigenvalues;
  int index_offset = 1;
  double tolerance = 0.0;

  std::size_t size() const { return eigenvalues.size(); }
  /// Eigenvalue with label `index` (index_offset based).
  double at(int index) const {
    const int i = index - index_offset;
    if (i < 0 || static_cast<std::size_t>(i) >= eigenvalues.size()) {
      throw InvalidArgument("eigenvalue index " + std::to_string(index) + " outside computed range");
    }
    return eigenvalues[static_cast<std::size_t>(i)];
  }
  int last_index() const { return index_offset + static_cast<int>(eigenvalues.size()) - 1; }
};

struct SpectralCoordinates {
  double C = 0.0;
  std::vector<double> b;      // b_n, n = 1..N
  std::vector<double> kappa;  // κ_n, n = 1..N
};

// ---------------------------------------------------------------------------
// Characteristic functions
// ---------------------------------------------------------------------------

/// Function whose zeros are exactly the eigenvalues of (q, bc).
///   Dirichlet: y2(1, λ)
///   Robin:     y'(1) + H y(1) for y(0) = 1, y'(0) = h
///   General:   c y(1) + d y'(1) for y = -b y1 + a y2, i.e. the determinant
///              of the boundary functionals on the fundamental pair.
/// For q = 0 the General form equals (ac + bdλ) sin√λ/√λ + (ad - bc) cos√λ,
/// so the √λ factor producing a spurious root at λ = 0 never appears.
inline double char_function(const Potential& q, const BoundaryCondition& bc, double lambda,
                            const Tolerances& tol = {}) {
  bc.validate();
  switch (bc.kind) {
    case BcKind::dirichlet: return solve_ivp(q, lambda, 0.0, 1.0, tol).value(1.0);
    case BcKind::robin: {
      const auto [y, dy] = solve_ivp(q, lambda, 1.0, bc.h, tol).at(1.0);
      return dy + bc.H * y;
    }
    case BcKind::general: {
      const auto [y1, y2] = fundamental_pair(q, lambda, tol);
      const auto [u1, du1] = y1.at(1.0);
      const auto [u2, du2] = y2.at(1.0);
      return bc.a * (bc.c * u2 + bc.d * du2) - bc.b * (bc.c * u1 + bc.d * du1);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Prüfer angle
// ---------------------------------------------------------------------------

/// Scaled Prüfer phase: y = ρ sinθ / √S, y' = ρ √S cosθ, so that
///   θ' = S cos²θ + ((λ - q)/S) sin²θ.
/// With θ(0) = α ∈ [0, π) fixed by the left condition and β ∈ (0, π] by the
/// right one, λ is the k-th eigenvalue (k = 0, 1, ...) iff θ(1, λ) = β + kπ.
class PruferCounter {
 public:
  PruferCounter(Potential q, BoundaryCondition bc)
      : q_(std::move(q)), bc_(bc), qbar_(mean(q_).value) {
    bc_.validate();
    tol_.rtol = 1e-14;
    tol_.atol = 1e-13;
  }

  double scale(double lambda) const { return std::sqrt(std::max(lambda - qbar_, 1.0)); }

  /// Angle in [0, π) of a point (y, y') ∝ (s1, s2) satisfying s·y + t·y' = 0.
  static double boundary_angle(double coef_y, double coef_dy, double S) {
    // y ∝ coef_dy, y' ∝ -coef_y; tanθ = S y / y'.
    double th = std::atan2(coef_dy * S, -coef_y);
    if (th < 0.0) th += std::numbers::pi;
    if (th >= std::numbers::pi) th -= std::numbers::pi;
    return th;
  }

  struct Phase {
    double theta_end;
    double beta;
  };

  Phase phase(double lambda) const {
    const auto [a, b, c, d] = bc_.coefficients();
    const double S = scale(lambda);
    const double alpha = boundary_angle(a, b, S);
    double beta = boundary_angle(c, d, S);
    if (beta <= 0.0) beta = std::numbers::pi;
    auto rhs = [&](double x, const State<1>& y) {
      const double sn = std::sin(y[0]);
      const double cs = std::cos(y[0]);
      return State<1>{S * cs * cs + ((lambda - q_(x)) / S) * sn * sn};
    };
    const auto end = dopri5<1>(rhs, 0.0, 1.0, State<1>{alpha}, tol_);
    return {end[0], beta};
  }

  /// θ(1,λ) - β - kπ; its sign is the sign of λ - λ_k.
  double mismatch(double lambda, int k) const {
    const auto ph = phase(lambda);
    return ph.theta_end - ph.beta - k * std::numbers::pi;
  }

  /// Number of eigenvalues strictly below λ.
  int count_below(double lambda) const {
    const auto ph = phase(lambda);
    const double r = (ph.theta_end - ph.beta) / std::numbers::pi;
    return r > 0.0 ? static_cast<int>(std::ceil(r)) : 0;
  }

  double potential_mean() const { return qbar_; }
  const Potential& potential() const { return q_; }
  const BoundaryCondition& bc() const { return bc_; }

 private:
  Potential q_;
  BoundaryCondition bc_;
  double qbar_;
  Tolerances tol_;
};

struct EigenOptions {
  /// Target absolute accuracy of each eigenvalue.
  double tolerance = 1e-9;
  /// Worker threads for independent indices (1 = sequential).
  unsigned threads = 1;
};

namespace detail {

struct RootResult {
  double value;
  double width;
};

/// Safeguarded secant (Illinois-weighted regula falsi) on a sign-changing
/// bracket; a bisection step replaces any secant step that would leave the
/// bracket or fail to shrink it.
template <class F>
RootResult refine_root(F&& f, double lo, double hi, double flo, double fhi, double xtol, int max_iter = 200) {
  int side = 0;
  for (int it = 0; it < max_iter; ++it) {
    if (hi - lo <= xtol) break;
    double x = (flo * hi - fhi * lo) / (flo - fhi);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    const double fx = f(x);
    if (fx == 0.0) return {x, 0.0};
    if ((fx < 0.0) == (flo < 0.0)) {
      lo = x;
      flo = fx;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = x;
      fhi = fx;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
  }
  // Final secant estimate inside the last bracket.
  double x = (flo * hi - fhi * lo) / (flo - fhi);
  if (!(x >= lo && x <= hi) || !std::isfinite(x)) x = 0.5 * (lo + hi);
  return {x, hi - lo};
}

}  // namespace detail

/// Eigenvalue with count-index k (k = 0 is the lowest), using a counter for
/// (q, bc). Returns the value and the final bracket width.
inline detail::RootResult locate_eigenvalue(const PruferCounter& counter, int k, double tolerance) {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const int n = k + counter.bc().index_offset();
  const double center = std::max(n, 0) * static_cast<double>(std::max(n, 0)) * pi2 + counter.potential_mean();
  double half = pi2 * (2.0 * std::max(n, 1) + 1.0) / 2.0;
  double lo = center - half;
  double hi = center + half;

  constexpr int kMaxExpansions = 80;
  double step = half;
  int expansions = 0;
  double flo = counter.mismatch(lo, k);
  while (flo > 0.0) {
    hi = std::min(hi, lo);
    lo -= step;
    step *= 2.0;
    flo = counter.mismatch(lo, k);
    if (++expansions > kMaxExpansions) {
      throw NumericalError("bracket_error", "cannot bracket eigenvalue index " + std::to_string(n) + " from below");
    }
  }
  step = half;
  double fhi = counter.mismatch(hi, k);
  while (fhi <= 0.0) {
    lo = std::max(lo, hi);
    flo = fhi;
    hi += step;
    step *= 2.0;
    fhi = counter.mismatch(hi, k);
    if (++expansions > kMaxExpansions) {
      throw NumericalError("bracket_error", "cannot bracket eigenvalue index " + std::to_string(n) + " from above");
    }
  }
  if (flo == 0.0) return {lo, 0.0};
  const double xtol = std::max(1e-3 * tolerance, 4e-15 * std::max(std::abs(lo), std::abs(hi)));
  return detail::refine_root([&](double x) { return counter.mismatch(x, k); }, lo, hi, flo, fhi, xtol);
}

/// The lowest m_max eigenvalues of (q, bc).
inline Spectrum eigenvalues(const Potential& q, const BoundaryCondition& bc, int m_max, const EigenOptions& opt = {}) {
  if (m_max < 1) throw InvalidArgument("m_max must be >= 1");
  const PruferCounter counter(q, bc);
  std::vector<detail::RootResult> roots(static_cast<std::size_t>(m_max));
  if (opt.threads <= 1) {
    for (int k = 0; k < m_max; ++k) roots[static_cast<std::size_t>(k)] = locate_eigenvalue(counter, k, opt.tolerance);
  } else {
    std::vector<std::future<void>> jobs;
    std::atomic<int> next{0};
    for (unsigned w = 0; w < opt.threads; ++w) {
      jobs.push_back(std::async(std::launch::async, [&] {
        for (int k = next++; k < m_max; k = next++) {
          roots[static_cast<std::size_t>(k)] = locate_eigenvalue(counter, k, opt.tolerance);
        }
      }));
    }
    for (auto& j : jobs) j.get();
  }

  Spectrum spec;
  spec.bc = bc;
  spec.index_offset = bc.index_offset();
  for (const auto& r : roots) {
    spec.eigenvalues.push_back(r.value);
    spec.tolerance = std::max(spec.tolerance, r.width);
  }
  for (std::size_t i = 1; i < spec.eigenvalues.size(); ++i) {
    if (!(spec.eigenvalues[i] > spec.eigenvalues[i - 1])) {
      throw NumericalError("degenerate_roots", "eigenvalues " + std::to_string(i - 1 + spec.index_offset) + " and " +
                                                   std::to_string(i + spec.index_offset) +
                                                   " are indistinguishable at the working tolerance");
    }
  }
  // Completeness: exactly m_max eigenvalues lie below the top one plus a margin.
  const double top = spec.eigenvalues.back();
  const double margin = std::max(1e-6, 1e-9 * std::abs(top));
  if (counter.count_below(top + margin) != m_max) {
    throw NumericalError("incomplete_spectrum", "Prüfer count does not certify " + std::to_string(m_max) + " eigenvalues");
  }
  spec.tolerance = std::max(spec.tolerance, 1e-3 * opt.tolerance);
  return spec;
}

// ---------------------------------------------------------------------------
// Eigenfunctions and terminal velocities (Dirichlet)
// ---------------------------------------------------------------------------

enum class Normalization { unit_l2_positive_slope, slope_one };

inline constexpr double kEigenResidualLimit = 1e-7;

/// ∫_0^1 u(x)² dx for a dense solution.
inline double norm_squared(const IvpSolution& u) {
  return integrate_piecewise([&](double x) {
    const double v = u.value(x);
    return v * v;
  }, 0.0, 1.0, 1e-12);
}

/// Dirichlet eigenfunction y2(·, λ_m), rescaled per `normalization`.
inline IvpSolution eigenfunction(const Potential& q, double lambda_m,
                                 Normalization normalization = Normalization::slope_one) {
  auto y2 = solve_ivp(q, lambda_m, 0.0, 1.0);
  const double residual = std::abs(y2.value(1.0));
  if (residual >= kEigenResidualLimit) {
    throw NumericalError("not_an_eigenvalue", "characteristic residual " + std::to_string(residual) +
                                                  " at lambda=" + std::to_string(lambda_m));
  }
  if (normalization == Normalization::slope_one) return y2;
  return y2.scaled(1.0 / std::sqrt(norm_squared(y2)));
}

struct TerminalVelocity {
  double velocity = 0.0;  // y2'(1, λ_n)
  double kappa = 0.0;     // log |y2'(1, λ_n)|
};

inline TerminalVelocity terminal_velocity(const Potential& q, double lambda_n) {
  const double v = solve_ivp(q, lambda_n, 0.0, 1.0).slope(1.0);
  if (std::abs(v) < 1e-12) {
    throw NumericalError("vanishing_terminal_velocity",
                         "y2'(1) vanishes at lambda=" + std::to_string(lambda_n) + "; not a consistent eigenvalue");
  }
  return {v, std::log(std::abs(v))};
}

/// C(q), b_n = λ_n - n²π² - C and κ_n for n = 1..N.
inline SpectralCoordinates spectral_coordinates(const Potential& q, int N, const EigenOptions& opt = {}) {
  if (N < 1) throw InvalidArgument("N must be >= 1");
  const auto spec = eigenvalues(q, BoundaryCondition::dirichlet(), N, opt);
  SpectralCoordinates sc;
  sc.C = mean(q).value;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  for (int n = 1; n <= N; ++n) {
    const double lam = spec.at(n);
    sc.b.push_back(lam - n * static_cast<double>(n) * pi2 - sc.C);
    sc.kappa.push_back(terminal_velocity(q, lam).kappa);
  }
  return sc;
}

}  // namespace qiso
