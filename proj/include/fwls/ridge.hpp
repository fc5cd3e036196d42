#ifndef FWLS_RIDGE_HPP
#define FWLS_RIDGE_HPP

// Ridge (Tikhonov) solve of the blend normal equations
//
//   (A^T A + lambda I) v = A^T y
//
// from accumulated sufficient statistics, plus the incremental paths:
// Sherman-Morrison updates of an explicit inverse for new rows, and block
// extension of the statistics and of the cached Cholesky factor for new
// models or meta-features.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fwls/core.hpp"
#include "fwls/gram.hpp"
#include "fwls/linalg.hpp"

namespace fwls {

inline constexpr double kDefaultLambda = 0.01;

/// Jitter multipliers (times trace(A^T A)/D) tried when a factorization fails.
inline constexpr std::array<double, 3> kJitterSteps = {1e-10, 1e-8, 1e-6};

/// Lower Cholesky factor of A^T A + lambda I with its columns permuted:
/// factor position p holds canonical column order[p].
struct CholeskyFactor {
  linalg::Matrix lower;
  std::vector<std::size_t> order;
  double lambda = 0.0;  // shift actually factored, jitter included
};

struct SolvedBlend {
  BlendCoefficients coeffs;
  double lambda = 0.0;            // requested
  double effective_lambda = 0.0;  // requested plus any jitter
  double train_rmse = 0.0;
  double relative_residual = 0.0;  // |(G + lambda I) v - A^T y| / |A^T y|
  std::optional<CholeskyFactor> factor_cache;

  bool jittered() const noexcept { return effective_lambda != lambda; }
};

/// sqrt((y^T y - 2 v.A^T y + v^T A^T A v) / N). Negative drift down to
/// -1e-10 (relative to the mean square target when that exceeds one) is
/// clamped to zero.
inline double training_rmse(const GramState& gs, const BlendCoefficients& coeffs) {
  if (!(coeffs.mapping() == gs.mapping))
    throw ContractViolation("training_rmse: coefficient/state dimension mismatch");
  if (gs.n_rows == 0) throw ContractViolation("training_rmse: empty state");
  const auto v = coeffs.flat();
  const std::size_t d = gs.dim();
  double quad = 0.0;
  for (std::size_t r = 0; r < d; ++r) {
    const double* row = gs.lower.data() + linalg::tri(r, 0);
    double off = 0.0;
    for (std::size_t c = 0; c < r; ++c) off += row[c] * v[c];
    quad += v[r] * (row[r] * v[r] + 2.0 * off);
  }
  const double n = static_cast<double>(gs.n_rows);
  const double mse = (gs.yty - 2.0 * linalg::dot(v, gs.xty) + quad) / n;
  if (mse >= 0.0) return std::sqrt(mse);
  const double slack = 1e-10 * std::max(1.0, gs.yty / n);
  if (mse >= -slack) return 0.0;
  throw Error("training_rmse: negative mean square error " + std::to_string(mse) +
              "; coefficients do not belong to this state");
}

namespace detail {

inline linalg::Matrix shifted(const GramState& gs, double lambda) {
  linalg::Matrix h = gs.dense();
  for (std::size_t i = 0; i < h.n; ++i) h(i, i) += lambda;
  return h;
}

inline double relative_residual(const GramState& gs, double lambda,
                                std::span<const double> v) {
  auto r = linalg::matvec(shifted(gs, lambda), v);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= gs.xty[i];
  const double scale = linalg::norm2(gs.xty);
  const double res = linalg::norm2(r);
  return scale > 0.0 ? res / scale : res;
}

inline double mean_diagonal(const GramState& gs) {
  double trace = 0.0;
  for (std::size_t i = 0; i < gs.dim(); ++i) trace += gs.gram(i, i);
  return trace / static_cast<double>(gs.dim());
}

/// Factors G + lambda I, escalating jitter on failure. Returns the factor and
/// the shift used.
inline CholeskyFactor factor(const GramState& gs, double lambda) {
  const double base = mean_diagonal(gs);
  std::vector<double> shifts{lambda};
  for (double step : kJitterSteps) shifts.push_back(lambda + step * base);
  for (double shift : shifts) {
    linalg::Matrix h = shifted(gs, shift);
    const double floor = linalg::pivot_floor(h);
    if (!linalg::cholesky(h, floor)) {
      std::vector<std::size_t> order(gs.dim());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      return {std::move(h), std::move(order), shift};
    }
  }
  throw SingularSystem("solve: A^T A + lambda I is singular for lambda = " +
                       std::to_string(lambda) + " even after jitter up to " +
                       std::to_string(shifts.back()),
                       lambda);
}

inline std::vector<double> solve_with(const CholeskyFactor& f,
                                      std::span<const double> xty) {
  std::vector<double> rhs(f.order.size());
  for (std::size_t p = 0; p < rhs.size(); ++p) rhs[p] = xty[f.order[p]];
  linalg::cholesky_solve(f.lower, rhs);
  std::vector<double> v(rhs.size());
  for (std::size_t p = 0; p < rhs.size(); ++p) v[f.order[p]] = rhs[p];
  return v;
}

inline SolvedBlend finish(const GramState& gs, double lambda, CholeskyFactor f) {
  SolvedBlend out;
  auto v = solve_with(f, gs.xty);
  out.lambda = lambda;
  out.effective_lambda = f.lambda;
  out.relative_residual = relative_residual(gs, f.lambda, v);
  out.coeffs = BlendCoefficients(gs.mapping, std::move(v), f.lambda);
  out.train_rmse = training_rmse(gs, out.coeffs);
  out.factor_cache = std::move(f);
  return out;
}

}  // namespace detail

/// Solves the regularized normal equations by Cholesky factorization.
/// If the factorization fails, lambda is raised by 1e-10, 1e-8, then 1e-6
/// times trace(A^T A)/D; the shift used is reported in effective_lambda.
inline SolvedBlend solve(const GramState& gs, double lambda = kDefaultLambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw ContractViolation("solve: lambda must be finite and >= 0");
  if (gs.n_rows < 1) throw ContractViolation("solve: state has no rows");
  return detail::finish(gs, lambda, detail::factor(gs, lambda));
}

/// Structural check of a gram state: non-negative diagonal and a successful
/// Cholesky of A^T A + eps I with eps = 1e-8 * max diagonal.
inline bool is_positive_semidefinite(const GramState& gs) {
  double max_diag = 0.0;
  for (std::size_t i = 0; i < gs.dim(); ++i) {
    if (gs.gram(i, i) < 0.0) return false;
    max_diag = std::max(max_diag, gs.gram(i, i));
  }
  if (max_diag == 0.0) return true;
  linalg::Matrix h = detail::shifted(gs, 1e-8 * max_diag);
  return !linalg::cholesky(h, 0.0).has_value();
}

// ---------------------------------------------------------------------------
// Sherman-Morrison path

/// Explicit inverse of A^T A + lambda I with the matching A^T y.
struct InverseState {
  linalg::Matrix inv;
  std::vector<double> xty;
  double lambda = 0.0;
  std::uint64_t n_rows = 0;
  DesignMapping mapping;

  std::vector<double> coefficients() const { return linalg::matvec(inv, xty); }
};

inline InverseState make_inverse_state(const GramState& gs, double lambda) {
  if (!(lambda >= 0.0)) throw ContractViolation("make_inverse_state: lambda < 0");
  CholeskyFactor f = detail::factor(gs, lambda);
  const std::size_t d = gs.dim();
  InverseState s{linalg::Matrix(d), gs.xty, f.lambda, gs.n_rows, gs.mapping};
  std::vector<double> e(d);
  for (std::size_t c = 0; c < d; ++c) {
    std::fill(e.begin(), e.end(), 0.0);
    e[c] = 1.0;
    linalg::cholesky_solve(f.lower, e);
    for (std::size_t r = 0; r < d; ++r) s.inv(r, c) = e[r];
  }
  // Symmetrize.
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < r; ++c)
      s.inv(r, c) = s.inv(c, r) = 0.5 * (s.inv(r, c) + s.inv(c, r));
  return s;
}

/// Adds one row (g, f, y) in O(D^2):
///   inv <- inv - (inv a)(inv a)^T / (1 + a^T inv a),  xty <- xty + a y.
inline InverseState add_datapoint(InverseState s, std::span<const double> g,
                                  std::span<const double> f, double y) {
  std::vector<double> a(s.mapping.dim());
  design_row_into(s.mapping, g, f, a);
  if (!std::isfinite(y)) throw NonFiniteValue("add_datapoint: non-finite target");
  const std::vector<double> u = linalg::matvec(s.inv, a);
  const double denom = 1.0 + linalg::dot(a, u);
  if (!(denom > 1e-12))
    throw DegenerateUpdate("add_datapoint: Sherman-Morrison denominator " +
                           std::to_string(denom) +
                           " is not positive; re-solve from the full state");
  const std::size_t d = a.size();
  for (std::size_t r = 0; r < d; ++r) {
    const double ur = u[r] / denom;
    double* row = s.inv.a.data() + r * d;
    for (std::size_t c = 0; c < d; ++c) row[c] -= ur * u[c];
  }
  for (std::size_t i = 0; i < d; ++i) s.xty[i] += a[i] * y;
  ++s.n_rows;
  return s;
}

// ---------------------------------------------------------------------------
// Column extension

enum class ExtensionKind { NewModel, NewFeature };

inline DesignMapping extended_mapping(const DesignMapping& m, ExtensionKind kind) {
  return kind == ExtensionKind::NewModel
             ? DesignMapping(m.n_models() + 1, m.n_features())
             : DesignMapping(m.n_models(), m.n_features() + 1);
}

/// Number of product columns a new model (M) or meta-feature (L) brings.
inline std::size_t new_column_count(const DesignMapping& m, ExtensionKind kind) {
  return kind == ExtensionKind::NewModel ? m.n_features() : m.n_models();
}

/// Canonical index, in the extended layout, of old column c.
inline std::size_t remap_old_column(const DesignMapping& old, ExtensionKind kind,
                                    std::size_t c) {
  auto [i, j] = old.split(c);
  return extended_mapping(old, kind).column_index(i, j);
}

/// Canonical index, in the extended layout, of the k-th new column: (L, k)
/// for a new model, (k, M) for a new meta-feature.
inline std::size_t new_column(const DesignMapping& old, ExtensionKind kind,
                              std::size_t k) {
  const DesignMapping ext = extended_mapping(old, kind);
  return kind == ExtensionKind::NewModel ? ext.column_index(old.n_models(), k)
                                         : ext.column_index(k, old.n_features());
}

/// The entries of A^T A and A^T y that involve the new columns, computed over
/// the same rows as the state being extended.
struct ColumnBlocks {
  ExtensionKind kind = ExtensionKind::NewModel;
  std::size_t d_old = 0;
  std::size_t d_new = 0;
  std::vector<double> cross;   // d_old x d_new, row-major; old columns canonical
  std::vector<double> corner;  // d_new x d_new, row-major, symmetric
  std::vector<double> new_xty;
  std::uint64_t n_rows = 0;
  std::uint64_t multiply_adds = 0;  // work spent computing the blocks
};

/// Splices new column blocks into a state and re-lays it out canonically for
/// the enlarged L or M.
inline GramState extend_columns(const GramState& gs, const ColumnBlocks& b) {
  const DesignMapping& old = gs.mapping;
  const std::size_t d_old = old.dim();
  const std::size_t d_new = new_column_count(old, b.kind);
  if (b.d_old != d_old || b.d_new != d_new || b.cross.size() != d_old * d_new ||
      b.corner.size() != d_new * d_new || b.new_xty.size() != d_new)
    throw ContractViolation("extend_columns: block dimensions do not match the state");
  if (b.n_rows != gs.n_rows)
    throw AlignmentMismatch("extend_columns: blocks cover " + std::to_string(b.n_rows) +
                            " rows but the state has " + std::to_string(gs.n_rows));
  GramState out(extended_mapping(old, b.kind));
  out.yty = gs.yty;
  out.n_rows = gs.n_rows;
  out.fingerprint = gs.fingerprint;
  auto put = [&](std::size_t r, std::size_t c, double v) {
    out.lower[r >= c ? linalg::tri(r, c) : linalg::tri(c, r)] = v;
  };
  std::vector<std::size_t> old_to(d_old), new_to(d_new);
  for (std::size_t c = 0; c < d_old; ++c) old_to[c] = remap_old_column(old, b.kind, c);
  for (std::size_t k = 0; k < d_new; ++k) new_to[k] = new_column(old, b.kind, k);
  for (std::size_t r = 0; r < d_old; ++r) {
    for (std::size_t c = 0; c <= r; ++c) put(old_to[r], old_to[c], gs.gram(r, c));
    for (std::size_t k = 0; k < d_new; ++k) put(old_to[r], new_to[k], b.cross[r * d_new + k]);
    out.xty[old_to[r]] = gs.xty[r];
  }
  for (std::size_t k = 0; k < d_new; ++k) {
    for (std::size_t l = 0; l <= k; ++l) put(new_to[k], new_to[l], b.corner[k * d_new + l]);
    out.xty[new_to[k]] = b.new_xty[k];
  }
  return out;
}

/// Re-solves after extend_columns by bordering the cached factor of the old
/// system instead of refactoring: with the old factor L11,
///   L11 B = H12,  L22 L22^T = H22 - B^T B,
/// which costs O(D_old^2 D_new + D_new^3). Falls back to a fresh solve when
/// the old blend carries no factor or the Schur complement is not positive.
inline SolvedBlend extend_solve(const SolvedBlend& prev, const GramState& extended,
                                ExtensionKind kind) {
  const DesignMapping& old = prev.coeffs.mapping();
  if (!(extended_mapping(old, kind) == extended.mapping))
    throw ContractViolation("extend_solve: extended state does not match the blend");
  if (!prev.factor_cache) return solve(extended, prev.lambda);
  const CholeskyFactor& f = *prev.factor_cache;
  const std::size_t d_old = old.dim();
  const std::size_t d_new = new_column_count(old, kind);
  const std::size_t d = d_old + d_new;
  const double shift = f.lambda;

  CholeskyFactor g;
  g.lambda = shift;
  g.order.resize(d);
  for (std::size_t p = 0; p < d_old; ++p) g.order[p] = remap_old_column(old, kind, f.order[p]);
  for (std::size_t k = 0; k < d_new; ++k) g.order[d_old + k] = new_column(old, kind, k);

  g.lower = linalg::Matrix(d);
  for (std::size_t r = 0; r < d_old; ++r)
    for (std::size_t c = 0; c <= r; ++c) g.lower(r, c) = f.lower(r, c);

  // B = L11^{-1} H12, one new column at a time.
  std::vector<double> col(d_old);
  std::vector<double> b(d_old * d_new);
  for (std::size_t k = 0; k < d_new; ++k) {
    for (std::size_t p = 0; p < d_old; ++p)
      col[p] = extended.gram(g.order[p], g.order[d_old + k]);
    linalg::forward_substitute(f.lower, col);
    for (std::size_t p = 0; p < d_old; ++p) b[p * d_new + k] = col[p];
  }
  linalg::Matrix schur(d_new);
  double max_diag = 0.0;
  for (std::size_t k = 0; k < d_new; ++k) {
    for (std::size_t l = 0; l <= k; ++l) {
      double s = extended.gram(g.order[d_old + k], g.order[d_old + l]);
      if (k == l) s += shift;
      for (std::size_t p = 0; p < d_old; ++p) s -= b[p * d_new + k] * b[p * d_new + l];
      schur(k, l) = s;
    }
    max_diag = std::max(max_diag, extended.gram(g.order[d_old + k], g.order[d_old + k]) + shift);
  }
  for (std::size_t p = 0; p < d_old; ++p)
    max_diag = std::max(max_diag, f.lower(p, p) * f.lower(p, p));
  if (linalg::cholesky(schur, static_cast<double>(d) * 2.220446049250313e-16 * max_diag))
    return solve(extended, prev.lambda);

  for (std::size_t k = 0; k < d_new; ++k) {
    for (std::size_t p = 0; p < d_old; ++p) g.lower(d_old + k, p) = b[p * d_new + k];
    for (std::size_t l = 0; l <= k; ++l) g.lower(d_old + k, d_old + l) = schur(k, l);
  }
  SolvedBlend out = detail::finish(extended, prev.lambda, std::move(g));
  return out;
}

}  // namespace fwls

#endif  // FWLS_RIDGE_HPP
