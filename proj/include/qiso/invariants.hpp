#pragma once

// Spectral invariants of Dirichlet operators on [0,1]: heat traces with a
// certified tail, the small-t heat expansion, relative heat traces and
// relative determinants of quasi-isospectral pairs.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "qiso/error.hpp"
#include "qiso/potential.hpp"
#include "qiso/spectrum.hpp"

namespace qiso {

/// Coefficients of
///   Tr e^{-tT_q} = c_{-1/2} t^{-1/2} + c_0 + c_{1/2} t^{1/2} + c_1 t + c_{3/2} t^{3/2} + O(t²)
/// for T_q = -d²/dx² + q with Dirichlet conditions on [0,1]:
///   c_{-1/2} = 1/(2√π),  c_0 = -1/2,  c_{1/2} = -∫q / √(4π),
///   c_1 = (q(0) + q(1)) / 4,
///   c_{3/2} = (½∫q² + ½(q'(0) - q'(1))) / √(4π).
struct HeatExpansion {
  double c_neg_half = 0.0;
  double c_0 = 0.0;
  double c_half = 0.0;
  double c_1 = 0.0;
  double c_three_half = 0.0;

  double operator()(double t) const {
    const double s = std::sqrt(t);
    return c_neg_half / s + c_0 + c_half * s + c_1 * t + c_three_half * t * s;
  }
};

inline HeatExpansion heat_expansion_coeffs(const Potential& q) {
  if (!q.has_endpoint_derivatives()) {
    throw InvalidArgument("heat coefficients need endpoint derivatives (sampled potential without a dq column)");
  }
  const double inv_sqrt_4pi = 1.0 / std::sqrt(4.0 * std::numbers::pi);
  HeatExpansion h;
  h.c_neg_half = inv_sqrt_4pi;
  h.c_0 = -0.5;
  h.c_half = -mean(q).value * inv_sqrt_4pi;
  h.c_1 = 0.25 * (q(0.0) + q(1.0));
  h.c_three_half =
      (0.5 * mean_square(q) + 0.5 * (q.derivative(0.0, 1) - q.derivative(1.0, 1))) * inv_sqrt_4pi;
  return h;
}

struct HeatTrace {
  double value = 0.0;
  double error_bound = 0.0;  // bound on |value - Tr e^{-tT_q}| from the truncated tail
  int terms = 0;
};

inline constexpr double kHeatTraceTolerance = 1e-10;

namespace detail {

/// Gaussian comparison: Σ_{m>M} e^{-(m²π² + shift) t} ≤ e^{-shift t} erfc(πM√t) / (2√(πt)).
inline double heat_tail_bound(int M, double t, double shift) {
  return std::exp(-shift * t) * std::erfc(std::numbers::pi * M * std::sqrt(t)) / (2.0 * std::sqrt(std::numbers::pi * t));
}

}  // namespace detail

/// Σ e^{-λ_m t} over a Dirichlet spectrum plus the asymptotic tail
/// λ_m ≈ m²π² + C. The tail is bounded using sup|b_m| over the computed
/// indices; throws if that bound exceeds 1e-10 (the message names the
/// number of eigenvalues required).
inline HeatTrace heat_trace(const Spectrum& spec, double t, double q_mean) {
  if (!(t > 0.0)) throw InvalidArgument("heat trace needs t > 0");
  if (spec.bc.kind != BcKind::dirichlet) throw InvalidArgument("heat trace is defined for Dirichlet spectra");
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const int M = spec.last_index();
  double b_sup = 0.0;
  double partial = 0.0;
  for (int m = 1; m <= M; ++m) {
    const double lam = spec.at(m);
    b_sup = std::max(b_sup, std::abs(lam - m * static_cast<double>(m) * pi2 - q_mean));
    partial += std::exp(-lam * t);
  }
  const double shift = q_mean - b_sup;
  const double bound = detail::heat_tail_bound(M, t, shift);
  if (!(bound <= kHeatTraceTolerance)) {
    int need = M;
    while (detail::heat_tail_bound(need, t, shift) > kHeatTraceTolerance && need < 1'000'000) need += 1 + need / 8;
    throw NumericalError("heat_tail", "heat trace tail bound " + std::to_string(bound) + " exceeds tolerance at t=" +
                                          std::to_string(t) + "; need about " + std::to_string(need) +
                                          " eigenvalues");
  }
  double tail = 0.0;
  for (int m = M + 1;; ++m) {
    const double term = std::exp(-(m * static_cast<double>(m) * pi2 + q_mean) * t);
    tail += term;
    if (term < 1e-20 * std::max(partial, 1e-300) || m > M + 10'000'000) break;
  }
  return {partial + tail, bound, M};
}

/// Σ_m (e^{-tλ_m(p)} - e^{-tλ_m(q)}) over equally deep spectra.
inline double relative_heat_trace(const Spectrum& spec_p, const Spectrum& spec_q, double t) {
  if (!(t > 0.0)) throw InvalidArgument("relative heat trace needs t > 0");
  if (spec_p.size() != spec_q.size() || spec_p.index_offset != spec_q.index_offset) {
    throw InvalidArgument("relative heat trace needs spectra of equal depth");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < spec_p.size(); ++i) {
    s += std::exp(-t * spec_p.eigenvalues[i]) - std::exp(-t * spec_q.eigenvalues[i]);
  }
  return s;
}

struct RelativeDeterminant {
  double value = 1.0;
  double log_value = 0.0;  // log λ_k(p) - log λ_k(q) = -ζ'(0) of the relative zeta function
  int k = 1;
  double lambda_k_p = 0.0;
  double lambda_k_q = 0.0;
};

inline constexpr double kSpectrumMatchTolerance = 5e-7;

/// Indices (labels) where two spectra differ by more than `tol`.
inline std::vector<int> differing_indices(const Spectrum& a, const Spectrum& b, double tol = kSpectrumMatchTolerance) {
  if (a.size() != b.size() || a.index_offset != b.index_offset) {
    throw InvalidArgument("spectra have different depth");
  }
  std::vector<int> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a.eigenvalues[i] - b.eigenvalues[i]) > tol) out.push_back(static_cast<int>(i) + a.index_offset);
  }
  return out;
}

/// det(T_p, T_q) = λ_k(p) / λ_k(q) for spectra that differ only at index k.
inline RelativeDeterminant relative_determinant(const Spectrum& spec_p, const Spectrum& spec_q, int k) {
  const auto diff = differing_indices(spec_p, spec_q);
  if (diff.size() > 1 || (diff.size() == 1 && diff.front() != k)) {
    std::string list;
    for (int i : diff) list += (list.empty() ? "" : ",") + std::to_string(i);
    throw Error(ErrorCategory::verification, "spectra_mismatch",
                "spectra must differ only at index " + std::to_string(k) + "; they differ at {" + list + "}");
  }
  RelativeDeterminant d;
  d.k = k;
  d.lambda_k_p = spec_p.at(k);
  d.lambda_k_q = spec_q.at(k);
  if (!(d.lambda_k_p > 0.0) || !(d.lambda_k_q > 0.0)) {
    throw NumericalError("nonpositive_eigenvalue", "relative determinant needs positive lambda_k");
  }
  d.log_value = std::log(d.lambda_k_p) - std::log(d.lambda_k_q);
  d.value = d.lambda_k_p / d.lambda_k_q;
  return d;
}

/// One pass/fail verification line: lhs compared against rhs within tolerance.
struct CheckReport {
  std::string check;
  bool pass = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double tolerance = 0.0;
};

inline CheckReport make_check(std::string name, double lhs, double rhs, double tol) {
  return {std::move(name), std::abs(lhs - rhs) < tol, lhs, rhs, tol};
}

struct MeanInvarianceReport {
  CheckReport check;  // lhs = mean(p), rhs = mean(q)
  double difference = 0.0;
  double c_half_p = 0.0;
  double c_half_q = 0.0;
};

inline MeanInvarianceReport verify_mean_invariance(const Potential& p, const Potential& q, double tol) {
  MeanInvarianceReport r;
  const double mp = mean(p).value;
  const double mq = mean(q).value;
  r.check = make_check("mean_invariance", mp, mq, tol);
  r.difference = std::abs(mp - mq);
  const double inv_sqrt_4pi = 1.0 / std::sqrt(4.0 * std::numbers::pi);
  r.c_half_p = -mp * inv_sqrt_4pi;
  r.c_half_q = -mq * inv_sqrt_4pi;
  return r;
}

}  // namespace qiso
