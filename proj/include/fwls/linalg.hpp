#ifndef FWLS_LINALG_HPP
#define FWLS_LINALG_HPP

// Small dense kernels for the D x D systems a blend produces. D stays in the
// low hundreds, so plain row-major loops are enough.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace fwls::linalg {

/// Offset of (r, c), r >= c, in a packed row-major lower triangle.
constexpr std::size_t tri(std::size_t r, std::size_t c) noexcept {
  return r * (r + 1) / 2 + c;
}
constexpr std::size_t packed_size(std::size_t dim) noexcept {
  return dim * (dim + 1) / 2;
}

/// Square row-major matrix.
struct Matrix {
  std::size_t n = 0;
  std::vector<double> a;

  Matrix() = default;
  explicit Matrix(std::size_t dim) : n(dim), a(dim * dim, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return a[r * n + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a[r * n + c]; }
  std::span<double> row(std::size_t r) { return {a.data() + r * n, n}; }
  std::span<const double> row(std::size_t r) const { return {a.data() + r * n, n}; }

  static Matrix identity(std::size_t dim) {
    Matrix m(dim);
    for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Matrix unpack_symmetric(std::span<const double> lower, std::size_t dim) {
  Matrix m(dim);
  for (std::size_t r = 0; r < dim; ++r)
    for (std::size_t c = 0; c <= r; ++c) m(r, c) = m(c, r) = lower[tri(r, c)];
  return m;
}

inline std::vector<double> matvec(const Matrix& m, std::span<const double> x) {
  std::vector<double> y(m.n, 0.0);
  for (std::size_t r = 0; r < m.n; ++r) {
    double s = 0.0;
    const double* row = m.a.data() + r * m.n;
    for (std::size_t c = 0; c < m.n; ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Smallest pivot accepted by cholesky(), relative to the largest diagonal.
inline double pivot_floor(const Matrix& m) {
  double max_diag = 0.0;
  for (std::size_t i = 0; i < m.n; ++i) max_diag = std::max(max_diag, std::abs(m(i, i)));
  return static_cast<double>(m.n) * 2.220446049250313e-16 * max_diag;
}

/// In-place lower Cholesky factor of a symmetric matrix (upper part ignored,
/// zeroed on success). Returns the failing pivot index, or nullopt on success.
/// Pivots at or below `floor` count as failure.
inline std::optional<std::size_t> cholesky(Matrix& m, double floor) {
  const std::size_t n = m.n;
  for (std::size_t j = 0; j < n; ++j) {
    double* rj = m.a.data() + j * n;
    double d = rj[j];
    for (std::size_t k = 0; k < j; ++k) d -= rj[k] * rj[k];
    if (!(d > floor)) return j;
    const double ljj = std::sqrt(d);
    rj[j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double* ri = m.a.data() + i * n;
      double s = ri[j];
      for (std::size_t k = 0; k < j; ++k) s -= ri[k] * rj[k];
      ri[j] = s / ljj;
    }
    for (std::size_t c = j + 1; c < n; ++c) rj[c] = 0.0;
  }
  return std::nullopt;
}

/// Solves L x = b in place.
inline void forward_substitute(const Matrix& l, std::span<double> b) {
  for (std::size_t i = 0; i < l.n; ++i) {
    double s = b[i];
    const double* ri = l.a.data() + i * l.n;
    for (std::size_t k = 0; k < i; ++k) s -= ri[k] * b[k];
    b[i] = s / ri[i];
  }
}

/// Solves L^T x = b in place.
inline void backward_substitute(const Matrix& l, std::span<double> b) {
  for (std::size_t ii = l.n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < l.n; ++k) s -= l(k, ii) * b[k];
    b[ii] = s / l(ii, ii);
  }
}

inline void cholesky_solve(const Matrix& l, std::span<double> b) {
  forward_substitute(l, b);
  backward_substitute(l, b);
}

}  // namespace fwls::linalg

#endif  // FWLS_LINALG_HPP
