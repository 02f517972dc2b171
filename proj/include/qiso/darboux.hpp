#pragma once

// Darboux transformations: the single transform q ↦ q - 2(log g)'', the
// double transform that shifts one Dirichlet eigenvalue (quasi-isospectral
// deformation), and the Robin-to-Dirichlet isospectral example.
//
// Every derivative of log g or log b is taken through the ODE and Wronskian
// identities; nothing here differentiates sampled data numerically.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include "qiso/error.hpp"
#include "qiso/ode.hpp"
#include "qiso/potential.hpp"
#include "qiso/spectrum.hpp"

namespace qiso {

/// The deformation data are inconsistent: gap condition, sign of λ₁,
/// or a vanishing Darboux denominator.
class DarbouxError : public NumericalError {
 public:
  DarbouxError(std::string code, const std::string& what, double location = std::nan(""),
               double value = std::nan(""))
      : NumericalError(std::move(code), what), location_(location), value_(value) {}
  double location() const noexcept { return location_; }
  double value() const noexcept { return value_; }

 private:
  double location_;
  double value_;
};

namespace detail {

/// Scans [0,1] on `samples` points for a zero or sign change of f.
/// Returns the first offending x, if any.
template <class F>
std::optional<double> find_sign_change(F&& f, int samples) {
  double prev = f(0.0);
  if (prev == 0.0) return 0.0;
  for (int i = 1; i < samples; ++i) {
    const double x = static_cast<double>(i) / (samples - 1);
    const double v = f(x);
    if (v == 0.0 || (v < 0.0) != (prev < 0.0)) return x;
    prev = v;
  }
  return std::nullopt;
}

/// Derivatives of log f given normalized ratios Lk = f^(k)/f, k = 1..4.
struct LogDerivatives {
  double d2, d3, d4;
};
inline LogDerivatives log_derivatives(double L1, double L2, double L3, double L4) {
  const double L1s = L1 * L1;
  return {L2 - L1s, L3 - 3.0 * L1 * L2 + 2.0 * L1s * L1,
          L4 - 4.0 * L1 * L3 - 3.0 * L2 * L2 + 12.0 * L1s * L2 - 6.0 * L1s * L1s};
}

}  // namespace detail

/// q̃ = q - 2 (log g)'' for a nonvanishing solution g of -u'' + q u = μ u.
/// Uses (log g)'' = (q - μ) - (g'/g)², and its x-derivatives for q̃', q̃''.
inline Potential darboux_single(const Potential& q, double mu, const IvpSolution& g) {
  if (std::abs(g.lambda() - mu) > 1e-7 * std::max(1.0, std::abs(mu))) {
    throw DarbouxError("residual_error", "g does not solve the equation at mu (its lambda is " +
                                             std::to_string(g.lambda()) + ")");
  }
  if (auto x = detail::find_sign_change([&](double s) { return g.value(s); }, 2048)) {
    throw DarbouxError("vanishing_denominator", "g vanishes near x=" + std::to_string(*x), *x, 0.0);
  }
  return Potential::derived(
      [q, mu, g](double x, int order) {
        const auto [gv, gd] = g.at(x);
        const double G1 = gd / gv;
        const double q0 = q(x);
        const double D2 = q0 - mu - G1 * G1;
        if (order == 0) return q0 - 2.0 * D2;
        const double q1 = q.derivative(x, 1);
        const double D3 = q1 - 2.0 * G1 * D2;
        if (order == 1) return q1 - 2.0 * D3;
        const double D4 = q.derivative(x, 2) - 2.0 * D2 * D2 - 2.0 * G1 * D3;
        return q.derivative(x, 2) - 2.0 * D4;
      },
      "darboux(" + q.description() + ", mu=" + std::to_string(mu) + ")", q.has_endpoint_derivatives());
}

/// h = W[g, f] / g together with h' = (μ - λ) f + G² f - G f', G = g'/g;
/// solves the transformed equation at the eigenvalue of f.
inline std::function<std::pair<double, double>(double)> darboux_transplant(const IvpSolution& g,
                                                                         const IvpSolution& f) {
  const double mu = g.lambda();
  const double lam = f.lambda();
  return [g, f, mu, lam](double x) {
    const auto [gv, gd] = g.at(x);
    const auto [fv, fd] = f.at(x);
    const double G = gd / gv;
    return std::pair<double, double>{fd - G * fv, (mu - lam) * fv + G * G * fv - G * fd};
  };
}

/// b = W[w, z_n] with b' = t w z_n and b'' = t (w' z_n + w z_n').
class WronskianDenominator {
 public:
  WronskianDenominator() = default;
  WronskianDenominator(Potential q, IvpSolution w, IvpSolution z, double lambda_n, double t)
      : q_(std::move(q)), w_(std::move(w)), z_(std::move(z)), lambda_n_(lambda_n), t_(t) {}

  double operator()(double x) const {
    const auto [w, dw] = w_.at(x);
    const auto [z, dz] = z_.at(x);
    return w * dz - dw * z;
  }
  double prime(double x) const { return t_ * w_.value(x) * z_.value(x); }
  double second(double x) const {
    const auto [w, dw] = w_.at(x);
    const auto [z, dz] = z_.at(x);
    return t_ * (dw * z + w * dz);
  }

  /// p^(order) = q^(order) - 2 (log b)^(order + 2), order in {0,1,2}.
  double transformed(double x, int order) const {
    const auto [w, dw] = w_.at(x);
    const auto [z, dz] = z_.at(x);
    const double qv = q_(x);
    const double t = t_;
    const double b = w * dz - dw * z;
    const double b1 = t * w * z;
    const double b2 = t * (dw * z + w * dz);
    const double sw = qv - lambda_n_ - t;  // w'' = sw w
    const double sz = qv - lambda_n_;      // z'' = sz z
    const double b3 = t * ((sw + sz) * w * z + 2.0 * dw * dz);
    double b4 = 0.0;
    if (order == 2) {
      const double q1 = q_.derivative(x, 1);
      b4 = t * (2.0 * q1 * w * z + (sw + sz) * (dw * z + w * dz) + 2.0 * (sw * w * dz + sz * dw * z));
    }
    const auto ld = detail::log_derivatives(b1 / b, b2 / b, b3 / b, b4 / b);
    switch (order) {
      case 0: return qv - 2.0 * ld.d2;
      case 1: return q_.derivative(x, 1) - 2.0 * ld.d3;
      default: return q_.derivative(x, 2) - 2.0 * ld.d4;
    }
  }

  const IvpSolution& w() const { return w_; }
  const IvpSolution& z() const { return z_; }
  double t() const { return t_; }
  double lambda_n() const { return lambda_n_; }

 private:
  Potential q_;
  IvpSolution w_, z_;
  double lambda_n_ = 0.0;
  double t_ = 0.0;
};

struct QuasiIsoResult {
  Potential p;
  Potential q;
  int n = 1;
  double t = 0.0;
  double lambda_n = 0.0;
  WronskianDenominator b;
  IvpSolution w;        // w_{n,t}
  IvpSolution z_n;      // slope-one eigenfunction of q at λ_n
  double y1_at_1 = 0.0; // y1(1, q, λ_n)
  double min_b = 0.0;
  double min_b_location = 0.0;
  Spectrum source_spectrum;
};

namespace detail {

/// Minimum of f on [0,1]: grid scan followed by golden-section refinement
/// around the best sample.
template <class F>
std::pair<double, double> minimize_on_unit_interval(F&& f, int samples) {
  int best = 0;
  double fbest = f(0.0);
  for (int i = 1; i < samples; ++i) {
    const double v = f(static_cast<double>(i) / (samples - 1));
    if (v < fbest) {
      fbest = v;
      best = i;
    }
  }
  const double h = 1.0 / (samples - 1);
  double a = std::max(0.0, (best - 1) * h);
  double c = std::min(1.0, (best + 1) * h);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = c - gr * (c - a), x2 = a + gr * (c - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 60 && c - a > 1e-12; ++it) {
    if (f1 < f2) {
      c = x2;
      x2 = x1;
      f2 = f1;
      x1 = c - gr * (c - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (c - a);
      f2 = f(x2);
    }
  }
  double xm = f1 < f2 ? x1 : x2;
  double fm = std::min(f1, f2);
  if (fbest < fm) {
    fm = fbest;
    xm = best * h;
  }
  return {xm, fm};
}

}  // namespace detail

/// Shifts the n-th Dirichlet eigenvalue of q by t (double Darboux transform):
///   w = y1(·, λ_n+t) + c y2(·, λ_n+t) with w(0) = 1, w(1) = y1(1, λ_n)
///   b = W[w, z_n],  p = q - 2 (log b)''.
/// `spectrum_depth` controls how many source eigenvalues are kept (at least n+1).
inline QuasiIsoResult quasi_isospectral(const Potential& q, int n, double t, int spectrum_depth = 0,
                                        const EigenOptions& opt = {}) {
  if (n < 1) throw InvalidArgument("n must be >= 1");
  if (!std::isfinite(t)) throw InvalidArgument("t must be finite");
  const int depth = std::max(n + 1, spectrum_depth);
  QuasiIsoResult r;
  r.q = q;
  r.n = n;
  r.t = t;
  r.source_spectrum = eigenvalues(q, BoundaryCondition::dirichlet(), depth, opt);
  const auto& spec = r.source_spectrum;
  if (spec.at(1) < 0.0) {
    throw DarbouxError("negative_ground_state",
                       "lambda_1(q) = " + std::to_string(spec.at(1)) + " < 0; the construction needs lambda_1 >= 0");
  }
  const double lam_n = spec.at(n);
  const double below = n == 1 ? 0.0 : spec.at(n - 1);  // λ_0 := 0
  const double above = spec.at(n + 1);
  if (!(below < lam_n + t && lam_n + t < above)) {
    std::ostringstream msg;
    msg << "gap condition violated: need " << below << " < " << lam_n + t << " < " << above;
    throw DarbouxError("gap_violation", msg.str());
  }
  r.lambda_n = lam_n;
  r.z_n = eigenfunction(q, lam_n, Normalization::slope_one);
  r.y1_at_1 = solve_ivp(q, lam_n, 1.0, 0.0).value(1.0);

  if (t == 0.0) {
    r.w = solve_ivp(q, lam_n, 1.0, 0.0);
  } else {
    const auto [y1, y2] = fundamental_pair(q, lam_n + t);
    const double c = (r.y1_at_1 - y1.value(1.0)) / y2.value(1.0);
    // w = y1 + c y2 has data (1, c) at x = 0.
    r.w = solve_ivp(q, lam_n + t, 1.0, c);
  }
  r.b = WronskianDenominator(q, r.w, r.z_n, lam_n, t);

  const auto b = r.b;
  const auto [xmin, bmin] = detail::minimize_on_unit_interval([&](double x) { return b(x); }, 4096);
  r.min_b = bmin;
  r.min_b_location = xmin;
  if (!(bmin > 0.0)) {
    throw DarbouxError("nonpositive_b",
                       "b_{n,t} is not positive: min " + std::to_string(bmin) + " at x=" + std::to_string(xmin),
                       xmin, bmin);
  }
  std::ostringstream desc;
  desc << "quasi(" << q.description() << ", n=" << n << ", t=" << t << ")";
  r.p = Potential::derived([b](double x, int order) { return b.transformed(x, order); }, desc.str(),
                           q.has_endpoint_derivatives());
  return r;
}

/// κ_{m,t}: eigenfunctions of p.
///   m = n:  z_n / b
///   m ≠ n:  (λ_n - λ_m) z_m - W[z_n, z_m]/z_n · (log b)'
/// Because (log b)' = t w z_n / b, the second term equals t w W[z_n, z_m] / b,
/// which is regular at the zeros of z_n.
inline std::function<double(double)> transformed_eigenfunctions(const QuasiIsoResult& r, int m) {
  if (m < 1) throw InvalidArgument("m must be >= 1");
  if (!(r.min_b > 0.0)) throw DarbouxError("nonpositive_b", "b_{n,t} is not strictly positive");
  const auto b = r.b;
  if (m == r.n) {
    const auto z = r.z_n;
    return [z, b](double x) { return z.value(x) / b(x); };
  }
  const double lam_m = m <= r.source_spectrum.last_index()
                           ? r.source_spectrum.at(m)
                           : eigenvalues(r.q, BoundaryCondition::dirichlet(), m).at(m);
  const auto zm = eigenfunction(r.q, lam_m, Normalization::slope_one);
  const auto zn = r.z_n;
  const auto w = r.w;
  const double t = r.t;
  const double lam_n = r.lambda_n;
  return [=](double x) {
    const auto [a, da] = zn.at(x);
    const auto [c, dc] = zm.at(x);
    const double wz = a * dc - da * c;
    return (lam_n - lam_m) * c - t * w.value(x) * wz / b(x);
  };
}

struct RobinToDirichlet {
  Potential q_tilde;
  IvpSolution ground_state;  // φ₁, φ₁(0) = 1, φ₁'(0) = h
  Spectrum robin;            // of q, labels 0..m-1
  Spectrum dirichlet;        // of q̃, labels 1..m-1; dirichlet.at(j) pairs with robin.at(j)
};

/// q̃ = q - 2 (log φ₁)'' from the Robin ground state. The Dirichlet spectrum
/// of q̃ reproduces the Robin spectrum of q from the second eigenvalue on; the
/// Robin ground state has no Dirichlet partner (1/φ₁ never vanishes).
inline RobinToDirichlet robin_to_dirichlet(const Potential& q, double h, double H, int m = 15,
                                           const EigenOptions& opt = {}) {
  if (m < 2) throw InvalidArgument("m must be >= 2");
  RobinToDirichlet out;
  out.robin = eigenvalues(q, BoundaryCondition::robin(h, H), m, opt);
  const double lam1 = out.robin.at(0);
  out.ground_state = solve_ivp(q, lam1, 1.0, h);
  if (auto x = detail::find_sign_change([&](double s) { return out.ground_state.value(s); }, 2048)) {
    throw DarbouxError("ground_state_zero", "Robin ground state vanishes near x=" + std::to_string(*x), *x, 0.0);
  }
  out.q_tilde = darboux_single(q, lam1, out.ground_state);
  out.dirichlet = eigenvalues(out.q_tilde, BoundaryCondition::dirichlet(), m - 1, opt);
  return out;
}

}  // namespace qiso
