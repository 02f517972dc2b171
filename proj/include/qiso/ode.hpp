#pragma once

// Initial-value integration of -u'' + q u = λ u on [0,1] with an adaptive
// Dormand-Prince 5(4) pair and its continuous extension, plus Wronskians.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "qiso/error.hpp"
#include "qiso/potential.hpp"

namespace qiso {

template <std::size_t N>
using State = std::array<double, N>;

struct Tolerances {
  double rtol = 1e-12;
  double atol = 1e-14;
  std::size_t max_steps = 1'000'000;
};

/// Dense-output coefficients of one accepted step.
template <std::size_t N>
struct DenseStep {
  double x0 = 0.0;
  double h = 0.0;
  std::array<State<N>, 5> r{};

  State<N> eval(double x) const {
    const double t = (x - x0) / h;
    const double s = 1.0 - t;
    State<N> y;
    for (std::size_t i = 0; i < N; ++i) {
      y[i] = r[0][i] + t * (r[1][i] + s * (r[2][i] + t * (r[3][i] + s * r[4][i])));
    }
    return y;
  }
};

namespace dopri {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                        a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                        a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                        e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                        d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                        d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
}  // namespace dopri

/// Integrates y' = f(x, y) from x0 to x1 (x1 > x0). `on_step` receives every
/// accepted DenseStep. Returns y(x1).
template <std::size_t N, class F, class OnStep>
State<N> dopri5(F&& f, double x0, double x1, State<N> y, const Tolerances& tol, OnStep&& on_step) {
  using namespace dopri;
  auto axpy = [](const State<N>& base, double h, std::initializer_list<std::pair<double, const State<N>*>> terms) {
    State<N> out = base;
    for (const auto& [c, k] : terms) {
      if (c == 0.0) continue;
      for (std::size_t i = 0; i < N; ++i) out[i] += h * c * (*k)[i];
    }
    return out;
  };

  double x = x0;
  State<N> k1 = f(x, y);
  // Initial step from the usual derivative-scale heuristic.
  double d0 = 0.0, dd1 = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    const double sc = tol.atol + tol.rtol * std::abs(y[i]);
    d0 += (y[i] / sc) * (y[i] / sc);
    dd1 += (k1[i] / sc) * (k1[i] / sc);
  }
  double h = (d0 < 1e-10 || dd1 < 1e-10) ? 1e-6 : 0.01 * std::sqrt(d0 / dd1);
  h = std::min({h, x1 - x0, 0.1 * (x1 - x0)});
  h = std::max(h, 1e-10);

  std::size_t steps = 0;
  bool last = false;
  State<N> k2, k3, k4, k5, k6, k7, ynew;
  while (!last) {
    if (++steps > tol.max_steps) throw IntegrationError(x, "step budget exhausted");
    if (x + 1.01 * h >= x1) {
      h = x1 - x;
      last = true;
    }
    k2 = f(x + c2 * h, axpy(y, h, {{a21, &k1}}));
    k3 = f(x + c3 * h, axpy(y, h, {{a31, &k1}, {a32, &k2}}));
    k4 = f(x + c4 * h, axpy(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    k5 = f(x + c5 * h, axpy(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    k6 = f(x + h, axpy(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    ynew = axpy(y, h, {{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
    k7 = f(x + h, ynew);

    double err = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = tol.atol + tol.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      err += (e / sc) * (e / sc);
    }
    err = std::sqrt(err / N);
    if (!std::isfinite(err)) throw IntegrationError(x, "non-finite derivative");

    if (err <= 1.0) {
      DenseStep<N> step;
      step.x0 = x;
      step.h = h;
      for (std::size_t i = 0; i < N; ++i) {
        const double ydiff = ynew[i] - y[i];
        const double bspl = h * k1[i] - ydiff;
        step.r[0][i] = y[i];
        step.r[1][i] = ydiff;
        step.r[2][i] = bspl;
        step.r[3][i] = ydiff - h * k7[i] - bspl;
        step.r[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
      }
      on_step(step);
      x = last ? x1 : x + h;
      y = ynew;
      k1 = k7;
      const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h *= fac;
    } else {
      last = false;
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
      if (h < 1e-13 * std::max(1.0, std::abs(x))) throw IntegrationError(x, "step size underflow");
    }
  }
  return y;
}

template <std::size_t N, class F>
State<N> dopri5(F&& f, double x0, double x1, State<N> y, const Tolerances& tol) {
  return dopri5<N>(std::forward<F>(f), x0, x1, y, tol, [](const DenseStep<N>&) {});
}

/// Piecewise-polynomial trajectory assembled from accepted steps.
template <std::size_t N>
class DenseTrajectory {
 public:
  void push(const DenseStep<N>& s) { steps_.push_back(s); }

  State<N> operator()(double x) const {
    auto it = std::upper_bound(steps_.begin(), steps_.end(), x,
                               [](double v, const DenseStep<N>& s) { return v < s.x0; });
    const auto& s = it == steps_.begin() ? steps_.front() : *std::prev(it);
    return s.eval(x);
  }

  const std::vector<DenseStep<N>>& steps() const { return steps_; }

 private:
  std::vector<DenseStep<N>> steps_;
};

/// |λ| above which solutions are integrated in scaled Prüfer variables
/// (θ, log ρ) rather than (u, u').
inline constexpr double kPruferSwitch = 1e4;

/// Solution (u, u') of -u'' + q u = λ u with given data at x = 0, with dense
/// output on [0,1]. Copies share the underlying trajectory.
class IvpSolution {
 public:
  IvpSolution() = default;

  double lambda() const { return data_->lambda; }

  /// (u(x), u'(x))
  std::pair<double, double> at(double x) const {
    const auto s = data_->traj(x);
    if (!data_->prufer) return {factor_ * s[0], factor_ * s[1]};
    const double rho = factor_ * std::exp(s[1]);
    const double sq = std::sqrt(data_->scale);
    return {rho * std::sin(s[0]) / sq, rho * sq * std::cos(s[0])};
  }
  double value(double x) const { return at(x).first; }
  double slope(double x) const { return at(x).second; }

  /// Step points of the integrator (strictly increasing, from 0 to 1).
  std::vector<double> grid() const {
    std::vector<double> g;
    for (const auto& s : data_->traj.steps()) g.push_back(s.x0);
    g.push_back(1.0);
    return g;
  }
  std::vector<double> u_values() const {
    std::vector<double> v;
    for (double x : grid()) v.push_back(value(x));
    return v;
  }
  std::vector<double> du_values() const {
    std::vector<double> v;
    for (double x : grid()) v.push_back(slope(x));
    return v;
  }
  std::size_t step_count() const { return data_->traj.steps().size(); }
  bool uses_prufer() const { return data_->prufer; }

  /// Returns a copy multiplied by `factor`.
  IvpSolution scaled(double factor) const {
    IvpSolution out;
    out.data_ = data_;
    out.factor_ = factor * factor_;
    return out;
  }

  friend IvpSolution solve_ivp(const Potential&, double, double, double, const Tolerances&);

 private:
  struct Data {
    double lambda = 0.0;
    bool prufer = false;
    double scale = 1.0;
    DenseTrajectory<2> traj;
  };
  std::shared_ptr<const Data> data_;
  double factor_ = 1.0;
};

/// Integrates -u'' + q u = λ u with u(0)=u0, u'(0)=du0 across [0,1].
inline IvpSolution solve_ivp(const Potential& q, double lambda, double u0, double du0,
                             const Tolerances& tol = {}) {
  if (u0 == 0.0 && du0 == 0.0) throw InvalidArgument("initial data (u0, du0) must not both vanish");
  auto data = std::make_shared<IvpSolution::Data>();
  data->lambda = lambda;
  auto record = [&](const DenseStep<2>& s) { data->traj.push(s); };
  if (std::abs(lambda) <= kPruferSwitch) {
    auto rhs = [&](double x, const State<2>& y) { return State<2>{y[1], (q(x) - lambda) * y[0]}; };
    dopri5<2>(rhs, 0.0, 1.0, State<2>{u0, du0}, tol, record);
  } else {
    // u = ρ sinθ / √S, u' = ρ √S cosθ
    const double S = std::sqrt(std::abs(lambda));
    data->prufer = true;
    data->scale = S;
    const double sq = std::sqrt(S);
    const double theta0 = std::atan2(sq * u0, du0 / sq);
    const double logrho0 = 0.5 * std::log(S * u0 * u0 + du0 * du0 / S);
    auto rhs = [&](double x, const State<2>& y) {
      const double sn = std::sin(y[0]);
      const double cs = std::cos(y[0]);
      const double w = (lambda - q(x)) / S;
      return State<2>{S * cs * cs + w * sn * sn, sn * cs * (S - w)};
    };
    Tolerances ptol = tol;
    ptol.rtol = std::min(tol.rtol, 1e-14);
    ptol.atol = std::max(tol.atol, 1e-13);
    dopri5<2>(rhs, 0.0, 1.0, State<2>{theta0, logrho0}, ptol, record);
  }
  IvpSolution sol;
  sol.data_ = std::move(data);
  return sol;
}

/// (y1, y2): y1(0)=1, y1'(0)=0 and y2(0)=0, y2'(0)=1. W[y1,y2] ≡ 1.
inline std::pair<IvpSolution, IvpSolution> fundamental_pair(const Potential& q, double lambda,
                                                            const Tolerances& tol = {}) {
  return {solve_ivp(q, lambda, 1.0, 0.0, tol), solve_ivp(q, lambda, 0.0, 1.0, tol)};
}

/// x ↦ u(x) v'(x) - u'(x) v(x)
inline std::function<double(double)> wronskian(const IvpSolution& u, const IvpSolution& v) {
  return [u, v](double x) {
    const auto [a, da] = u.at(x);
    const auto [b, db] = v.at(x);
    return a * db - da * b;
  };
}

}  // namespace qiso
