#ifndef IMH_TEST_HELPERS_HPP
#define IMH_TEST_HELPERS_HPP

// Test-side oracles, deliberately independent of the library's own numeric
// paths: adaptive quadrature, brute-force stationary vectors, a direct
// linear solve, central finite differences, and a reference Adam update.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

inline double simpson_piece(const std::function<double(double)>& f, double a, double b) {
  return (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double left = simpson_piece(f, a, m);
  const double right = simpson_piece(f, m, b);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson_rec(f, a, m, left, tol / 2.0, depth - 1) +
         adaptive_simpson_rec(f, m, b, right, tol / 2.0, depth - 1);
}

/// Adaptive Simpson to the requested absolute tolerance.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-9, int depth = 40) {
  return adaptive_simpson_rec(f, a, b, simpson_piece(f, a, b), tol, depth);
}

/// Stationary vector by repeated squaring of the column-stochastic matrix:
/// column 0 of t^(2^rounds).
inline std::vector<double> stationary_by_powers(std::vector<double> t, std::size_t k,
                                                int rounds = 10) {
  auto mul = [k](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> c(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t l = 0; l < k; ++l)
        for (std::size_t j = 0; j < k; ++j) c[i * k + j] += a[i * k + l] * b[l * k + j];
    return c;
  };
  for (int r = 0; r < rounds; ++r) t = mul(t, t);
  std::vector<double> col(k);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    col[i] = t[i * k];
    sum += col[i];
  }
  for (auto& v : col) v /= sum;
  return col;
}

/// Stationary vector by direct linear solve of (T - I)v = 0, sum v = 1,
/// via Gaussian elimination with partial pivoting. Small K only.
inline std::vector<double> stationary_by_solve(const std::vector<double>& t, std::size_t k) {
  std::vector<double> a(k * (k + 1), 0.0);
  // rows 0..k-2: (T - I) v = 0; last row: sum v = 1
  for (std::size_t r = 0; r + 1 < k; ++r) {
    for (std::size_t c = 0; c < k; ++c) a[r * (k + 1) + c] = t[r * k + c] - (r == c ? 1.0 : 0.0);
    a[r * (k + 1) + k] = 0.0;
  }
  for (std::size_t c = 0; c < k; ++c) a[(k - 1) * (k + 1) + c] = 1.0;
  a[(k - 1) * (k + 1) + k] = 1.0;

  for (std::size_t col = 0; col < k; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (std::abs(a[r * (k + 1) + col]) > std::abs(a[pivot * (k + 1) + col])) pivot = r;
    if (pivot != col)
      for (std::size_t c = 0; c <= k; ++c) std::swap(a[col * (k + 1) + c], a[pivot * (k + 1) + c]);
    const double head = a[col * (k + 1) + col];
    if (head == 0.0) throw std::runtime_error("singular system in stationary_by_solve");
    for (std::size_t r = 0; r < k; ++r) {
      if (r == col) continue;
      const double factor = a[r * (k + 1) + col] / head;
      for (std::size_t c = col; c <= k; ++c) a[r * (k + 1) + c] -= factor * a[col * (k + 1) + c];
    }
  }
  std::vector<double> v(k);
  for (std::size_t r = 0; r < k; ++r) v[r] = a[r * (k + 1) + k] / a[r * (k + 1) + r];
  return v;
}

/// Central finite difference of f w.r.t. params[i].
inline double central_diff(const std::function<double()>& f, std::vector<double>& params,
                           std::size_t i, double h = 1e-5) {
  const double keep = params[i];
  params[i] = keep + h;
  const double up = f();
  params[i] = keep - h;
  const double down = f();
  params[i] = keep;
  return (up - down) / (2.0 * h);
}

/// Verbatim Adam update, kept separate from the library implementation.
struct RefAdam {
  std::vector<double> m, v;
  long t = 0;
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;

  explicit RefAdam(std::size_t n, double lr_in = 1e-3) : m(n, 0.0), v(n, 0.0), lr(lr_in) {}

  void update(std::vector<double>& w, const std::vector<double>& g) {
    ++t;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t));
      const double vh = v[i] / (1 - std::pow(b2, t));
      w[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
};

inline double rel_err(double got, double want) {
  const double scale = std::max(std::abs(want), 1e-12);
  return std::abs(got - want) / scale;
}

}  // namespace oracle

#endif
