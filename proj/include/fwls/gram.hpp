#ifndef FWLS_GRAM_HPP
#define FWLS_GRAM_HPP

// Single-pass accumulation of the ridge sufficient statistics A^T A, A^T y
// and y^T y, where row n of A is design_row(g(x_n), f(x_n)). A is never
// materialized: each row is expanded into one D-vector and folded into a
// packed lower triangle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <iterator>
#include <ranges>
#include <span>
#include <thread>
#include <vector>

#include "fwls/core.hpp"
#include "fwls/linalg.hpp"

namespace fwls {

/// Sufficient statistics of a blend over N rows.
struct GramState {
  DesignMapping mapping;
  std::vector<double> lower;  // packed lower triangle of A^T A, canonical order
  std::vector<double> xty;    // A^T y
  double yty = 0.0;
  std::uint64_t n_rows = 0;
  std::uint64_t fingerprint = 0;  // see fwls::fingerprint

  GramState() = default;
  explicit GramState(DesignMapping m)
      : mapping(m), lower(linalg::packed_size(m.dim()), 0.0), xty(m.dim(), 0.0) {}

  std::size_t dim() const noexcept { return mapping.dim(); }

  double gram(std::size_t r, std::size_t c) const {
    return r >= c ? lower[linalg::tri(r, c)] : lower[linalg::tri(c, r)];
  }

  linalg::Matrix dense() const { return linalg::unpack_symmetric(lower, dim()); }

  /// Largest |entry| of A^T A; the scale for all gram tolerances.
  double max_abs() const {
    double m = 0.0;
    for (double x : lower) m = std::max(m, std::abs(x));
    return m;
  }

  friend bool operator==(const GramState&, const GramState&) = default;
};

/// Componentwise sum of two states over the same mapping. Row order is a then
/// b, which only matters for the fingerprint.
inline GramState merge(const GramState& a, const GramState& b) {
  if (!(a.mapping == b.mapping))
    throw ContractViolation("merge: mapping mismatch (L=" +
                            std::to_string(a.mapping.n_models()) + ",M=" +
                            std::to_string(a.mapping.n_features()) + " vs L=" +
                            std::to_string(b.mapping.n_models()) + ",M=" +
                            std::to_string(b.mapping.n_features()) + ")");
  GramState out = a;
  for (std::size_t k = 0; k < out.lower.size(); ++k) out.lower[k] += b.lower[k];
  for (std::size_t k = 0; k < out.xty.size(); ++k) out.xty[k] += b.xty[k];
  out.yty += b.yty;
  out.n_rows += b.n_rows;
  out.fingerprint = fingerprint::concat(a.fingerprint, b.fingerprint, b.n_rows);
  return out;
}

/// Streaming accumulator. Rows are summed into a chunk-local triangle which
/// is folded into the running total every `chunk_rows` rows. Scratch memory
/// is two packed triangles plus one design row, whatever N is.
class GramAccumulator {
 public:
  static constexpr std::size_t kDefaultChunkRows = 4096;

  explicit GramAccumulator(DesignMapping m,
                           std::size_t chunk_rows = kDefaultChunkRows)
      : total_(m),
        chunk_(m),
        row_(m.dim(), 0.0),
        chunk_rows_(std::max<std::size_t>(chunk_rows, 1)) {}

  void add(const RowView& r) {
    const DesignMapping& m = total_.mapping;
    design_row_into(m, r.g, r.f, row_);
    if (!std::isfinite(r.y))
      throw NonFiniteValue("accumulate: non-finite target in row " +
                           std::to_string(total_.n_rows + chunk_.n_rows));
    for (double a : row_)
      if (!std::isfinite(a))
        throw NonFiniteValue("accumulate: non-finite design value in row " +
                             std::to_string(total_.n_rows + chunk_.n_rows));
    const std::size_t d = m.dim();
    double* lower = chunk_.lower.data();
    const double* a = row_.data();
    for (std::size_t c = 0; c < d; ++c) {
      const double ac = a[c];
      double* dst = lower + linalg::tri(c, 0);
      for (std::size_t k = 0; k <= c; ++k) dst[k] += ac * a[k];
      chunk_.xty[c] += ac * r.y;
    }
    chunk_.yty += r.y * r.y;
    ++chunk_.n_rows;
    chunk_.fingerprint = fingerprint::push(chunk_.fingerprint, r.id);
    if (chunk_.n_rows == chunk_rows_) flush();
  }

  template <std::ranges::input_range Rows>
  void add_all(Rows&& rows) {
    for (auto&& r : rows) add(RowView(r));
  }

  /// Statistics of everything added so far.
  GramState finish() {
    flush();
    return total_;
  }

  /// Doubles of scratch space held besides the caller's rows.
  std::size_t scratch_doubles() const noexcept {
    return total_.lower.size() + total_.xty.size() + chunk_.lower.size() +
           chunk_.xty.size() + row_.size();
  }
  std::size_t chunk_rows() const noexcept { return chunk_rows_; }

 private:
  void flush() {
    if (chunk_.n_rows == 0) return;
    total_ = merge(total_, chunk_);
    std::fill(chunk_.lower.begin(), chunk_.lower.end(), 0.0);
    std::fill(chunk_.xty.begin(), chunk_.xty.end(), 0.0);
    chunk_.yty = 0.0;
    chunk_.n_rows = 0;
    chunk_.fingerprint = 0;
  }

  GramState total_;
  GramState chunk_;
  std::vector<double> row_;
  std::size_t chunk_rows_;
};

/// Adds `rows` to `state`. An empty range leaves the state unchanged.
template <std::ranges::input_range Rows>
GramState accumulate(const GramState& state, Rows&& rows) {
  GramAccumulator acc(state.mapping);
  acc.add_all(std::forward<Rows>(rows));
  GramState delta = acc.finish();
  if (delta.n_rows == 0) return state;
  return merge(state, delta);
}

inline GramState accumulate(const StackedDataset& ds) {
  return accumulate(GramState(ds.mapping()), ds.rows());
}

/// Merges partial states pairwise, (0,1) (2,3) ... per level, so the tree
/// depends only on the number of parts.
inline GramState merge_tree(std::vector<GramState> parts) {
  if (parts.empty()) throw ContractViolation("merge_tree: nothing to merge");
  while (parts.size() > 1) {
    std::vector<GramState> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t k = 0; k + 1 < parts.size(); k += 2)
      next.push_back(merge(parts[k], parts[k + 1]));
    if (parts.size() % 2) next.push_back(std::move(parts.back()));
    parts = std::move(next);
  }
  return std::move(parts.front());
}

/// Contiguous block [first, last) of rows owned by `worker` out of `workers`.
inline std::pair<std::size_t, std::size_t> worker_block(std::size_t n_rows,
                                                        std::size_t workers,
                                                        std::size_t worker) {
  return {n_rows * worker / workers, n_rows * (worker + 1) / workers};
}

/// Accumulates a random-access row range with `n_workers` threads, each
/// owning a private state over a contiguous block. With one worker the result
/// is bit-identical to accumulate().
template <std::ranges::random_access_range Rows>
GramState parallel_accumulate(DesignMapping mapping, Rows&& rows,
                              std::size_t n_workers) {
  if (n_workers < 1) throw ContractViolation("parallel_accumulate: n_workers < 1");
  const std::size_t n = static_cast<std::size_t>(std::ranges::size(rows));
  const GramState empty(mapping);
  if (n_workers == 1) return accumulate(empty, rows);

  std::vector<GramState> parts(n_workers, empty);
  std::vector<std::exception_ptr> errors(n_workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          auto [first, last] = worker_block(n, n_workers, w);
          auto begin = std::ranges::begin(rows);
          parts[w] = accumulate(empty, std::ranges::subrange(begin + first, begin + last));
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return merge_tree(std::move(parts));
}

inline GramState parallel_accumulate(const StackedDataset& ds, std::size_t n_workers) {
  return parallel_accumulate(ds.mapping(), ds.rows(), n_workers);
}

inline std::size_t default_workers() {
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Restricts a state to a subset of meta-features (in the given order). The
/// result equals accumulating the dataset with only those features.
inline GramState select_features(const GramState& gs,
                                 std::span<const std::size_t> features) {
  const DesignMapping& m = gs.mapping;
  require(!features.empty(), "select_features: empty feature list");
  for (std::size_t j : features)
    require(j < m.n_features(), "select_features: feature index out of range");
  GramState out(DesignMapping(m.n_models(), features.size()));
  const std::size_t L = m.n_models();
  std::vector<std::size_t> src;
  src.reserve(out.dim());
  for (std::size_t j : features)
    for (std::size_t i = 0; i < L; ++i) src.push_back(m.column_index(i, j));
  for (std::size_t r = 0; r < src.size(); ++r) {
    for (std::size_t c = 0; c <= r; ++c)
      out.lower[linalg::tri(r, c)] = gs.gram(src[r], src[c]);
    out.xty[r] = gs.xty[src[r]];
  }
  out.yty = gs.yty;
  out.n_rows = gs.n_rows;
  out.fingerprint = gs.fingerprint;
  return out;
}

}  // namespace fwls

#endif  // FWLS_GRAM_HPP
