#pragma once

// Independent eigenvalue oracle for tests: second-order finite differences
// for -u'' + q u on a uniform Dirichlet grid, eigenvalues by Sturm-sequence
// bisection on the symmetric tridiagonal matrix, then two Richardson stages
// (the discretization error expands in even powers of h).

#include <cmath>
#include <functional>
#include <vector>

namespace fd {

/// Number of eigenvalues of the tridiagonal matrix (diag d, constant
/// off-diagonal e) strictly below x.
inline int count_below(const std::vector<double>& d, double e, double x) {
  int count = 0;
  double p = 1.0;
  const double e2 = e * e;
  for (std::size_t i = 0; i < d.size(); ++i) {
    p = (d[i] - x) - (i == 0 ? 0.0 : e2 / p);
    if (p == 0.0) p = -1e-300;
    if (p < 0.0) ++count;
  }
  return count;
}

/// Lowest `count` eigenvalues of the N-interval discretization.
inline std::vector<double> grid_eigenvalues(const std::function<double(double)>& q, int N, int count) {
  const double h = 1.0 / N;
  std::vector<double> d(N - 1);
  double lo = 1e300, hi = -1e300;
  for (int i = 1; i < N; ++i) {
    d[i - 1] = 2.0 / (h * h) + q(i * h);
    lo = std::min(lo, d[i - 1]);
    hi = std::max(hi, d[i - 1]);
  }
  const double e = -1.0 / (h * h);
  lo -= 2.0 * std::abs(e);
  hi += 2.0 * std::abs(e);
  std::vector<double> out;
  for (int k = 0; k < count; ++k) {
    double a = lo, b = hi;
    for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++it) {
      const double mid = 0.5 * (a + b);
      if (count_below(d, e, mid) > k) {
        b = mid;
      } else {
        a = mid;
      }
    }
    out.push_back(0.5 * (a + b));
  }
  return out;
}

/// Richardson-extrapolated Dirichlet eigenvalues 1..count from grids N, 2N, 4N.
inline std::vector<double> eigenvalues(const std::function<double(double)>& q, int count, int N = 500) {
  const auto e1 = grid_eigenvalues(q, N, count);
  const auto e2 = grid_eigenvalues(q, 2 * N, count);
  const auto e4 = grid_eigenvalues(q, 4 * N, count);
  std::vector<double> out(count);
  for (int k = 0; k < count; ++k) {
    const double r12 = (4.0 * e2[k] - e1[k]) / 3.0;
    const double r24 = (4.0 * e4[k] - e2[k]) / 3.0;
    out[k] = (16.0 * r24 - r12) / 15.0;
  }
  return out;
}

}  // namespace fd
