#pragma once

// Potentials q on [0,1]: analytic expressions, sampled grids with cubic
// interpolation, and derived potentials (e.g. Darboux outputs) defined by a
// callable that returns values and derivatives.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "qiso/error.hpp"
#include "qiso/expression.hpp"

namespace qiso {

enum class PotentialKind { expression, sampled, derived };

inline const char* to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::expression: return "expression";
    case PotentialKind::sampled: return "sampled";
    case PotentialKind::derived: return "derived";
  }
  return "?";
}

namespace detail {

class PotentialImpl {
 public:
  virtual ~PotentialImpl() = default;
  /// order in {0,1,2}
  virtual double eval(double x, int order) const = 0;
  virtual PotentialKind kind() const = 0;
  virtual std::string describe() const = 0;
  virtual bool has_endpoint_derivatives() const { return true; }
};

class ExpressionImpl final : public PotentialImpl {
 public:
  explicit ExpressionImpl(expr::NodePtr root)
      : root_(std::move(root)),
        d1_(expr::differentiate(root_)),
        d2_(expr::differentiate(d1_)),
        p0_(root_),
        p1_(d1_),
        p2_(d2_) {}

  double eval(double x, int order) const override {
    switch (order) {
      case 0: return p0_(x);
      case 1: return p1_(x);
      default: return p2_(x);
    }
  }
  PotentialKind kind() const override { return PotentialKind::expression; }
  std::string describe() const override { return expr::to_string(root_); }
  const expr::NodePtr& root() const { return root_; }

 private:
  expr::NodePtr root_, d1_, d2_;
  expr::Program p0_, p1_, p2_;
};

/// Uniform-grid cubic interpolant. Without derivative data a not-a-knot
/// spline is used; with derivative data, piecewise cubic Hermite.
class SampledImpl final : public PotentialImpl {
 public:
  SampledImpl(std::vector<double> values, std::optional<std::vector<double>> slopes)
      : y_(std::move(values)), dy_(std::move(slopes)) {
    const std::size_t n = y_.size();
    if (n < 17) throw InvalidArgument("sampled potential needs at least 17 nodes");
    if (n % 2 == 0) throw InvalidArgument("sampled potential needs an odd node count");
    if (dy_ && dy_->size() != n) throw InvalidArgument("derivative column size mismatch");
    for (double v : y_) {
      if (!std::isfinite(v)) throw InvalidArgument("non-finite sample value");
    }
    h_ = 1.0 / static_cast<double>(n - 1);
    if (!dy_) build_not_a_knot();
  }

  double eval(double x, int order) const override {
    const std::size_t n = y_.size();
    x = std::clamp(x, 0.0, 1.0);
    auto i = static_cast<std::size_t>(x / h_);
    if (i >= n - 1) i = n - 2;
    const double x0 = static_cast<double>(i) * h_;
    return dy_ ? hermite(i, x - x0, order) : spline(i, x - x0, order);
  }

  PotentialKind kind() const override { return PotentialKind::sampled; }
  std::string describe() const override {
    return "sampled(" + std::to_string(y_.size()) + (dy_ ? " nodes, with slopes)" : " nodes)");
  }
  bool has_endpoint_derivatives() const override { return dy_.has_value(); }

  const std::vector<double>& values() const { return y_; }
  const std::optional<std::vector<double>>& slopes() const { return dy_; }

 private:
  // Second-derivative moments M with not-a-knot end conditions. Eliminating
  // M_0 = 2M_1 - M_2 (and symmetrically at the right end) leaves a
  // tridiagonal system in M_1..M_{n-2}.
  void build_not_a_knot() {
    const std::size_t n = y_.size();
    const std::size_t m = n - 2;
    std::vector<double> lower(m, 1.0), diag(m, 4.0), upper(m, 1.0), rhs(m);
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = k + 1;
      rhs[k] = 6.0 * (y_[i + 1] - 2.0 * y_[i] + y_[i - 1]) / (h_ * h_);
    }
    diag[0] = 6.0;
    upper[0] = 0.0;
    diag[m - 1] = 6.0;
    lower[m - 1] = 0.0;
    for (std::size_t k = 1; k < m; ++k) {
      const double w = lower[k] / diag[k - 1];
      diag[k] -= w * upper[k - 1];
      rhs[k] -= w * rhs[k - 1];
    }
    std::vector<double> sol(m);
    sol[m - 1] = rhs[m - 1] / diag[m - 1];
    for (std::size_t k = m - 1; k-- > 0;) sol[k] = (rhs[k] - upper[k] * sol[k + 1]) / diag[k];
    moments_.assign(n, 0.0);
    for (std::size_t k = 0; k < m; ++k) moments_[k + 1] = sol[k];
    moments_[0] = 2.0 * moments_[1] - moments_[2];
    moments_[n - 1] = 2.0 * moments_[n - 2] - moments_[n - 3];
  }

  double spline(std::size_t i, double s, int order) const {
    const double h = h_;
    const double a = h - s;  // distance to right node
    const double m0 = moments_[i], m1 = moments_[i + 1];
    const double y0 = y_[i], y1 = y_[i + 1];
    switch (order) {
      case 0:
        return m0 * a * a * a / (6 * h) + m1 * s * s * s / (6 * h) + (y0 / h - m0 * h / 6) * a +
               (y1 / h - m1 * h / 6) * s;
      case 1:
        return -m0 * a * a / (2 * h) + m1 * s * s / (2 * h) - (y0 / h - m0 * h / 6) +
               (y1 / h - m1 * h / 6);
      default: return (m0 * a + m1 * s) / h;
    }
  }

  double hermite(std::size_t i, double s, int order) const {
    const double h = h_;
    const double t = s / h;
    const double y0 = y_[i], y1 = y_[i + 1];
    const double d0 = (*dy_)[i] * h, d1 = (*dy_)[i + 1] * h;
    switch (order) {
      case 0: {
        const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
        const double h10 = t * (1 - t) * (1 - t);
        const double h01 = t * t * (3 - 2 * t);
        const double h11 = t * t * (t - 1);
        return h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1;
      }
      case 1: {
        const double h00 = 6 * t * t - 6 * t;
        const double h10 = 3 * t * t - 4 * t + 1;
        const double h01 = -6 * t * t + 6 * t;
        const double h11 = 3 * t * t - 2 * t;
        return (h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1) / h;
      }
      default: {
        const double h00 = 12 * t - 6;
        const double h10 = 6 * t - 4;
        const double h01 = -12 * t + 6;
        const double h11 = 6 * t - 2;
        return (h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1) / (h * h);
      }
    }
  }

  std::vector<double> y_;
  std::optional<std::vector<double>> dy_;
  std::vector<double> moments_;
  double h_ = 0.0;
};

class DerivedImpl final : public PotentialImpl {
 public:
  using Fn = std::function<double(double, int)>;
  DerivedImpl(Fn fn, std::string description, bool endpoint_derivatives)
      : fn_(std::move(fn)), description_(std::move(description)), endpoint_derivatives_(endpoint_derivatives) {}

  double eval(double x, int order) const override { return fn_(x, order); }
  PotentialKind kind() const override { return PotentialKind::derived; }
  std::string describe() const override { return description_; }
  bool has_endpoint_derivatives() const override { return endpoint_derivatives_; }

 private:
  Fn fn_;
  std::string description_;
  bool endpoint_derivatives_;
};

}  // namespace detail

/// Immutable handle to a real potential on [0,1]. Cheap to copy; safe to
/// share and evaluate from several threads.
class Potential {
 public:
  /// The zero potential.
  Potential() : Potential(expr::constant(0.0)) {}

  explicit Potential(expr::NodePtr root) {
    expr::validate_on_unit_interval(root);
    impl_ = std::make_shared<detail::ExpressionImpl>(std::move(root));
  }

  explicit Potential(std::shared_ptr<const detail::PotentialImpl> impl) : impl_(std::move(impl)) {}

  static Potential constant(double c) { return Potential(expr::constant(c)); }

  /// Uniform grid on [0,1]; node count odd and >= 17.
  static Potential sampled(std::vector<double> values, std::optional<std::vector<double>> slopes = std::nullopt) {
    return Potential(std::make_shared<detail::SampledImpl>(std::move(values), std::move(slopes)));
  }

  /// Potential given by fn(x, order) for order in {0,1,2}.
  static Potential derived(detail::DerivedImpl::Fn fn, std::string description,
                           bool endpoint_derivatives = true) {
    return Potential(std::make_shared<detail::DerivedImpl>(std::move(fn), std::move(description),
                                                           endpoint_derivatives));
  }

  double operator()(double x) const { return impl_->eval(x, 0); }

  double derivative(double x, int order) const {
    if (order < 0 || order > 2) throw InvalidArgument("potential derivative order must be 0, 1 or 2");
    return impl_->eval(x, order);
  }

  PotentialKind kind() const { return impl_->kind(); }
  std::string description() const { return impl_->describe(); }
  bool has_endpoint_derivatives() const { return impl_->has_endpoint_derivatives(); }

  /// Expression tree, for the expression kind only.
  const expr::NodePtr* expression() const {
    auto e = dynamic_cast<const detail::ExpressionImpl*>(impl_.get());
    return e ? &e->root() : nullptr;
  }
  const detail::SampledImpl* sampled_data() const {
    return dynamic_cast<const detail::SampledImpl*>(impl_.get());
  }

 private:
  std::shared_ptr<const detail::PotentialImpl> impl_;
};

/// Parses an expression in x; rejects expressions undefined anywhere on [0,1].
inline Potential parse_potential(std::string_view text) { return Potential(expr::parse(text)); }

/// C(q), the mean of q over [0,1].
struct PotentialMean {
  double value = 0.0;
  double error_estimate = 0.0;
};

inline constexpr double kQuadratureTolerance = 1e-12;

/// Adaptive Gauss-Kronrod integral of f over [a,b] to absolute tolerance
/// `tol` (relaxed to a few ulps of the L1 norm when that is larger).
template <class F>
double integrate(F&& f, double a, double b, double tol = kQuadratureTolerance, double* error = nullptr) {
  double err = 0.0, l1 = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 20, 1e-14, &err, &l1);
  const double allowed = std::max(tol, 8.0 * std::numeric_limits<double>::epsilon() * l1);
  if (!(err <= allowed) || !std::isfinite(v)) {
    std::ostringstream msg;
    msg << "adaptive quadrature did not converge (error estimate " << err << ", allowed " << allowed << ")";
    throw NumericalError("quadrature_error", msg.str());
  }
  if (error) *error = err;
  return v;
}

/// Integrands built from dense ODE output are smooth only between solver
/// steps, which stalls adaptive refinement. Composite 15-point Gauss on 512
/// and 1024 panels; the difference of the two is the error estimate, checked
/// against tol·max(1, |result|).
template <class F>
double integrate_piecewise(F&& f, double a, double b, double tol, double* error = nullptr) {
  using Rule = boost::math::quadrature::gauss<double, 15>;
  auto composite = [&](int panels) {
    const double h = (b - a) / panels;
    double s = 0.0;
    for (int i = 0; i < panels; ++i) s += Rule::integrate(f, a + i * h, a + (i + 1) * h);
    return s;
  };
  const double coarse = composite(512);
  const double fine = composite(1024);
  const double err = std::abs(fine - coarse);
  if (!(err <= tol * std::max(1.0, std::abs(fine))) || !std::isfinite(fine)) {
    std::ostringstream msg;
    msg << "composite quadrature did not converge (error estimate " << err << ", allowed " << tol << ")";
    throw NumericalError("quadrature_error", msg.str());
  }
  if (error) *error = err;
  return fine;
}

inline constexpr double kDerivedQuadratureTolerance = 1e-10;

/// Composite Simpson over the nodes of a uniform grid with an odd node count.
inline double simpson(const std::vector<double>& y) {
  const std::size_t n = y.size();
  const double h = 1.0 / static_cast<double>(n - 1);
  double s = y.front() + y.back();
  for (std::size_t i = 1; i + 1 < n; ++i) s += (i % 2 ? 4.0 : 2.0) * y[i];
  return s * h / 3.0;
}

inline PotentialMean mean(const Potential& q) {
  if (auto s = q.sampled_data()) return {simpson(s->values()), 0.0};
  double err = 0.0;
  auto f = [&](double x) { return q(x); };
  const double v = q.kind() == PotentialKind::derived
                       ? integrate_piecewise(f, 0.0, 1.0, kDerivedQuadratureTolerance, &err)
                       : integrate(f, 0.0, 1.0, kQuadratureTolerance, &err);
  return {v, err};
}

/// ∫_0^1 q(x)^2 dx
inline double mean_square(const Potential& q) {
  auto f = [&](double x) {
    const double v = q(x);
    return v * v;
  };
  if (q.kind() == PotentialKind::derived) {
    return integrate_piecewise(f, 0.0, 1.0, kDerivedQuadratureTolerance);
  }
  return integrate(f, 0.0, 1.0);
}

/// x ↦ q(1-x).
inline Potential reflect(const Potential& q) {
  if (auto root = q.expression()) {
    return Potential(expr::substitute(*root, expr::constant(1.0) - expr::variable()));
  }
  if (auto s = q.sampled_data()) {
    std::vector<double> v(s->values().rbegin(), s->values().rend());
    std::optional<std::vector<double>> d;
    if (s->slopes()) {
      d.emplace(s->slopes()->rbegin(), s->slopes()->rend());
      for (double& e : *d) e = -e;
    }
    return Potential::sampled(std::move(v), std::move(d));
  }
  return Potential::derived(
      [q](double x, int order) {
        const double v = q.derivative(1.0 - x, order);
        return order == 1 ? -v : v;
      },
      "reflect(" + q.description() + ")", q.has_endpoint_derivatives());
}

/// Sampled estimate of max |q| on [0,1].
inline double sup_norm(const Potential& q, int samples = 8193) {
  double m = 0.0;
  for (int i = 0; i < samples; ++i) m = std::max(m, std::abs(q(static_cast<double>(i) / (samples - 1))));
  return m;
}

inline double min_value(const Potential& q, int samples = 2049) {
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) m = std::min(m, q(static_cast<double>(i) / (samples - 1)));
  return m;
}

// ---------------------------------------------------------------------------
// CSV ingestion / export ("x,q" with optional "dq" column)
// ---------------------------------------------------------------------------

inline Potential read_potential_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument("empty potential CSV");
  auto trim = [](std::string s) {
    s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
    return s;
  };
  const std::string header = trim(line);
  bool with_slopes = false;
  if (header == "x,q,dq") {
    with_slopes = true;
  } else if (header != "x,q") {
    throw InvalidArgument("potential CSV header must be \"x,q\" or \"x,q,dq\", got \"" + header + "\"");
  }
  std::vector<double> xs, qs, dqs;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    line = trim(line);
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        cells.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw InvalidArgument("malformed number on CSV row " + std::to_string(row));
      }
    }
    if (cells.size() != (with_slopes ? 3u : 2u)) {
      throw InvalidArgument("wrong column count on CSV row " + std::to_string(row));
    }
    xs.push_back(cells[0]);
    qs.push_back(cells[1]);
    if (with_slopes) dqs.push_back(cells[2]);
  }
  if (xs.size() < 2) throw InvalidArgument("potential CSV has too few rows");
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) throw InvalidArgument("CSV x column must be strictly increasing");
  }
  const double step = 1.0 / static_cast<double>(xs.size() - 1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (std::abs(xs[i] - static_cast<double>(i) * step) > 1e-9) {
      throw InvalidArgument("CSV x column must be a uniform grid from 0 to 1");
    }
  }
  std::optional<std::vector<double>> slopes;
  if (with_slopes) slopes = std::move(dqs);
  return Potential::sampled(std::move(qs), std::move(slopes));
}

inline Potential read_potential_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  return read_potential_csv(in);
}

/// Samples q on a uniform grid of `nodes` points, full double precision.
inline void write_potential_csv(std::ostream& out, const Potential& q, int nodes = 1025, bool with_slopes = false) {
  if (nodes < 17 || nodes % 2 == 0) throw InvalidArgument("export node count must be odd and >= 17");
  out << (with_slopes ? "x,q,dq\n" : "x,q\n");
  out << std::setprecision(17);
  for (int i = 0; i < nodes; ++i) {
    const double x = static_cast<double>(i) / (nodes - 1);
    out << x << ',' << q(x);
    if (with_slopes) out << ',' << q.derivative(x, 1);
    out << '\n';
  }
}

}  // namespace qiso
