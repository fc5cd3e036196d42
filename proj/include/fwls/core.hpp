#ifndef FWLS_CORE_HPP
#define FWLS_CORE_HPP

// Domain types for feature-weighted linear stacking.
//
// A blend of L models g_i with M meta-features f_j predicts
//
//   b(x) = sum_{i,j} v_ij * f_j(x) * g_i(x)
//
// which is an ordinary linear model over the M*L product columns
// f_j(x) * g_i(x). Column (i, j) sits at index j*L + i: grouped by
// meta-feature, models varying fastest. Every on-disk and in-memory layout
// in this library uses that order.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <ranges>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fwls/error.hpp"

namespace fwls {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

/// (model, meta-feature) -> product column bijection.
class DesignMapping {
 public:
  DesignMapping() = default;
  DesignMapping(std::size_t n_models, std::size_t n_features)
      : n_models_(n_models), n_features_(n_features) {
    require(n_models >= 1 && n_features >= 1,
            "DesignMapping: need at least one model and one meta-feature");
  }

  std::size_t n_models() const noexcept { return n_models_; }
  std::size_t n_features() const noexcept { return n_features_; }
  std::size_t dim() const noexcept { return n_models_ * n_features_; }

  std::size_t column_index(std::size_t model, std::size_t feature) const {
    if (model >= n_models_ || feature >= n_features_)
      throw ContractViolation("column_index: (" + std::to_string(model) + ", " +
                              std::to_string(feature) + ") out of range for L=" +
                              std::to_string(n_models_) + ", M=" +
                              std::to_string(n_features_));
    return feature * n_models_ + model;
  }

  /// Inverse of column_index: returns (model, feature).
  std::pair<std::size_t, std::size_t> split(std::size_t column) const {
    if (column >= dim())
      throw ContractViolation("split: column " + std::to_string(column) +
                              " out of range");
    return {column % n_models_, column / n_models_};
  }

  friend bool operator==(const DesignMapping&, const DesignMapping&) = default;

 private:
  std::size_t n_models_ = 0;
  std::size_t n_features_ = 0;
};

/// One example as seen by the accumulators: model predictions, meta-feature
/// values, target and an optional identifier.
struct RowView {
  std::span<const double> g;
  std::span<const double> f;
  double y = 0.0;
  std::string_view id;
};

/// N rows of (target, L predictions, M meta-features). Immutable once built;
/// every stored value is checked finite on construction.
class StackedDataset {
 public:
  StackedDataset() = default;

  /// model_preds and meta_feats are row-major (N x L and N x M).
  StackedDataset(std::vector<double> targets, std::vector<double> model_preds,
                 std::vector<double> meta_feats, std::size_t n_models,
                 std::size_t n_features,
                 std::vector<std::string> model_names = {},
                 std::vector<std::string> feature_names = {},
                 std::vector<std::string> row_ids = {})
      : targets_(std::move(targets)),
        preds_(std::move(model_preds)),
        feats_(std::move(meta_feats)),
        n_models_(n_models),
        n_features_(n_features),
        model_names_(std::move(model_names)),
        feature_names_(std::move(feature_names)),
        row_ids_(std::move(row_ids)) {
    const std::size_t n = targets_.size();
    require(n >= 1, "StackedDataset: need at least one row");
    require(n_models_ >= 1 && n_features_ >= 1,
            "StackedDataset: need at least one model and one meta-feature");
    require(preds_.size() == n * n_models_,
            "StackedDataset: model prediction matrix is not N x L");
    require(feats_.size() == n * n_features_,
            "StackedDataset: meta-feature matrix is not N x M");
    require(row_ids_.empty() || row_ids_.size() == n,
            "StackedDataset: row id count differs from row count");
    if (model_names_.empty())
      for (std::size_t i = 0; i < n_models_; ++i)
        model_names_.push_back("g" + std::to_string(i));
    if (feature_names_.empty())
      for (std::size_t j = 0; j < n_features_; ++j)
        feature_names_.push_back("f" + std::to_string(j));
    require(model_names_.size() == n_models_, "StackedDataset: model name count");
    require(feature_names_.size() == n_features_,
            "StackedDataset: feature name count");
    for (std::size_t r = 0; r < n; ++r) {
      bool ok = std::isfinite(targets_[r]);
      for (std::size_t i = 0; ok && i < n_models_; ++i)
        ok = std::isfinite(preds_[r * n_models_ + i]);
      for (std::size_t j = 0; ok && j < n_features_; ++j)
        ok = std::isfinite(feats_[r * n_features_ + j]);
      if (!ok)
        throw NonFiniteValue("StackedDataset: non-finite value in row " +
                             std::to_string(r) +
                             (row_ids_.empty() ? "" : " (id " + row_ids_[r] + ")"));
    }
  }

  std::size_t n_rows() const noexcept { return targets_.size(); }
  std::size_t n_models() const noexcept { return n_models_; }
  std::size_t n_features() const noexcept { return n_features_; }
  DesignMapping mapping() const { return {n_models_, n_features_}; }

  std::span<const double> targets() const noexcept { return targets_; }
  std::span<const double> model_preds() const noexcept { return preds_; }
  std::span<const double> meta_feats() const noexcept { return feats_; }
  const std::vector<std::string>& model_names() const noexcept { return model_names_; }
  const std::vector<std::string>& feature_names() const noexcept {
    return feature_names_;
  }
  const std::vector<std::string>& row_ids() const noexcept { return row_ids_; }
  bool has_ids() const noexcept { return !row_ids_.empty(); }

  std::span<const double> g(std::size_t r) const {
    return std::span<const double>(preds_).subspan(r * n_models_, n_models_);
  }
  std::span<const double> f(std::size_t r) const {
    return std::span<const double>(feats_).subspan(r * n_features_, n_features_);
  }
  double y(std::size_t r) const { return targets_[r]; }
  std::string_view id(std::size_t r) const {
    return row_ids_.empty() ? std::string_view{} : std::string_view(row_ids_[r]);
  }

  RowView row(std::size_t r) const { return {g(r), f(r), y(r), id(r)}; }

  /// Lazy view over rows [first, last).
  auto rows(std::size_t first, std::size_t last) const {
    return std::views::iota(first, last) |
           std::views::transform([this](std::size_t r) { return row(r); });
  }
  auto rows() const { return rows(0, n_rows()); }

  /// Copy of the rows listed in `index`, in that order.
  StackedDataset subset_rows(std::span<const std::size_t> index) const {
    std::vector<double> t, p, fm;
    std::vector<std::string> ids;
    t.reserve(index.size());
    for (std::size_t r : index) {
      require(r < n_rows(), "subset_rows: row index out of range");
      t.push_back(targets_[r]);
      auto gr = g(r);
      p.insert(p.end(), gr.begin(), gr.end());
      auto fr = f(r);
      fm.insert(fm.end(), fr.begin(), fr.end());
      if (has_ids()) ids.push_back(row_ids_[r]);
    }
    return {std::move(t),  std::move(p),      std::move(fm),
            n_models_,     n_features_,       model_names_,
            feature_names_, std::move(ids)};
  }

  /// Copy keeping only the listed meta-feature columns, in the given order.
  StackedDataset select_features(std::span<const std::size_t> features) const {
    require(!features.empty(), "select_features: empty feature list");
    for (std::size_t j : features)
      require(j < n_features_, "select_features: feature index out of range");
    std::vector<double> fm;
    fm.reserve(n_rows() * features.size());
    for (std::size_t r = 0; r < n_rows(); ++r)
      for (std::size_t j : features) fm.push_back(feats_[r * n_features_ + j]);
    std::vector<std::string> names;
    for (std::size_t j : features) names.push_back(feature_names_[j]);
    return {targets_,         preds_,           std::move(fm), n_models_,
            features.size(),  model_names_,     std::move(names), row_ids_};
  }

 private:
  std::vector<double> targets_;
  std::vector<double> preds_;
  std::vector<double> feats_;
  std::size_t n_models_ = 0;
  std::size_t n_features_ = 0;
  std::vector<std::string> model_names_;
  std::vector<std::string> feature_names_;
  std::vector<std::string> row_ids_;
};

/// Fitted blend weights v_ij, stored flat in canonical column order.
class BlendCoefficients {
 public:
  BlendCoefficients() = default;
  BlendCoefficients(DesignMapping mapping, std::vector<double> v, double lambda)
      : mapping_(mapping), v_(std::move(v)), lambda_(lambda) {
    require(v_.size() == mapping_.dim(),
            "BlendCoefficients: coefficient count differs from M*L");
    require(lambda_ >= 0.0, "BlendCoefficients: negative lambda");
    for (double x : v_)
      if (!std::isfinite(x)) throw NonFiniteValue("BlendCoefficients: non-finite weight");
  }

  const DesignMapping& mapping() const noexcept { return mapping_; }
  std::size_t n_models() const noexcept { return mapping_.n_models(); }
  std::size_t n_features() const noexcept { return mapping_.n_features(); }
  double lambda() const noexcept { return lambda_; }
  std::span<const double> flat() const noexcept { return v_; }

  double weight(std::size_t model, std::size_t feature) const {
    return v_[mapping_.column_index(model, feature)];
  }

  /// Effective weight of model i at a point with meta-features f.
  double model_weight(std::size_t model, std::span<const double> f) const {
    require(f.size() == n_features(), "model_weight: meta-feature length");
    double w = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) w += weight(model, j) * f[j];
    return w;
  }

 private:
  DesignMapping mapping_;
  std::vector<double> v_;
  double lambda_ = 0.0;
};

/// Writes the M*L product features of (g, f) into `out`.
inline void design_row_into(const DesignMapping& m, std::span<const double> g,
                            std::span<const double> f, std::span<double> out) {
  if (g.size() != m.n_models() || f.size() != m.n_features() ||
      out.size() != m.dim())
    throw ContractViolation("design_row: expected " + std::to_string(m.n_models()) +
                            " predictions and " + std::to_string(m.n_features()) +
                            " meta-features, got " + std::to_string(g.size()) +
                            " and " + std::to_string(f.size()));
  const std::size_t L = g.size();
  for (std::size_t j = 0; j < f.size(); ++j) {
    const double fj = f[j];
    double* dst = out.data() + j * L;
    for (std::size_t i = 0; i < L; ++i) dst[i] = fj * g[i];
  }
}

inline std::vector<double> design_row(std::span<const double> g,
                                      std::span<const double> f) {
  DesignMapping m(g.size(), f.size());
  std::vector<double> out(m.dim());
  design_row_into(m, g, f, out);
  return out;
}

/// sum_ij v_ij f_j g_i, evaluated as dot(design_row(g, f), v) in column order.
inline double blend_predict(const BlendCoefficients& c, std::span<const double> g,
                            std::span<const double> f) {
  if (g.size() != c.n_models() || f.size() != c.n_features())
    throw ContractViolation("blend_predict: dimension mismatch");
  const auto v = c.flat();
  const std::size_t L = g.size();
  double acc = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j)
    for (std::size_t i = 0; i < L; ++i) acc += (f[j] * g[i]) * v[j * L + i];
  return acc;
}

/// Prepends an all-ones meta-feature (f0) and/or an all-ones model (g0).
/// Not idempotent: apply once.
inline StackedDataset augment_constants(const StackedDataset& ds, bool add_f0,
                                        bool add_g0) {
  const std::size_t n = ds.n_rows();
  const std::size_t L = ds.n_models() + (add_g0 ? 1 : 0);
  const std::size_t M = ds.n_features() + (add_f0 ? 1 : 0);
  std::vector<double> p, fm;
  p.reserve(n * L);
  fm.reserve(n * M);
  for (std::size_t r = 0; r < n; ++r) {
    if (add_g0) p.push_back(1.0);
    auto gr = ds.g(r);
    p.insert(p.end(), gr.begin(), gr.end());
    if (add_f0) fm.push_back(1.0);
    auto fr = ds.f(r);
    fm.insert(fm.end(), fr.begin(), fr.end());
  }
  std::vector<std::string> mn, fn;
  if (add_g0) mn.emplace_back("const");
  mn.insert(mn.end(), ds.model_names().begin(), ds.model_names().end());
  if (add_f0) fn.emplace_back("const");
  fn.insert(fn.end(), ds.feature_names().begin(), ds.feature_names().end());
  return {std::vector<double>(ds.targets().begin(), ds.targets().end()),
          std::move(p), std::move(fm), L, M, std::move(mn), std::move(fn),
          ds.row_ids()};
}

/// Optional affine rescaling of meta-features, (f - shift) / scale.
/// Constant columns keep shift 0 and scale 1 so f0 stays identically 1.
struct Standardizer {
  std::vector<double> shift;
  std::vector<double> scale;

  static Standardizer fit(const StackedDataset& ds) {
    const std::size_t M = ds.n_features();
    const double n = static_cast<double>(ds.n_rows());
    Standardizer s{std::vector<double>(M, 0.0), std::vector<double>(M, 1.0)};
    for (std::size_t j = 0; j < M; ++j) {
      double mean = 0.0;
      for (std::size_t r = 0; r < ds.n_rows(); ++r) mean += ds.f(r)[j];
      mean /= n;
      double ss = 0.0;
      for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        const double d = ds.f(r)[j] - mean;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / n);
      if (sd > 0.0) {
        s.shift[j] = mean;
        s.scale[j] = sd;
      }
    }
    return s;
  }

  void apply(std::span<double> f) const {
    require(f.size() == shift.size(), "Standardizer: feature count mismatch");
    for (std::size_t j = 0; j < f.size(); ++j) f[j] = (f[j] - shift[j]) / scale[j];
  }

  StackedDataset apply(const StackedDataset& ds) const {
    std::vector<double> fm(ds.meta_feats().begin(), ds.meta_feats().end());
    const std::size_t M = ds.n_features();
    for (std::size_t r = 0; r < ds.n_rows(); ++r)
      apply(std::span<double>(fm).subspan(r * M, M));
    return {std::vector<double>(ds.targets().begin(), ds.targets().end()),
            std::vector<double>(ds.model_preds().begin(), ds.model_preds().end()),
            std::move(fm), ds.n_models(), M, ds.model_names(), ds.feature_names(),
            ds.row_ids()};
  }
};

/// Row-order fingerprint of a stream of row identifiers.
///
/// fp(r_1..r_n) = sum_k h(id_k) * P^(n-k) mod 2^64 with h = FNV-1a. The
/// polynomial form makes it mergeable: fp(a ++ b) = fp(a) * P^|b| + fp(b).
namespace fingerprint {

inline constexpr std::uint64_t kBase = 0x100000001b3ULL;

inline std::uint64_t hash_id(std::string_view id) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t power(std::uint64_t base, std::uint64_t exp) noexcept {
  std::uint64_t result = 1;
  while (exp) {
    if (exp & 1) result *= base;
    base *= base;
    exp >>= 1;
  }
  return result;
}

inline std::uint64_t push(std::uint64_t fp, std::string_view id) noexcept {
  return fp * kBase + hash_id(id);
}

inline std::uint64_t concat(std::uint64_t a, std::uint64_t b,
                            std::uint64_t b_rows) noexcept {
  return a * power(kBase, b_rows) + b;
}

inline std::uint64_t of(const StackedDataset& ds) {
  std::uint64_t fp = 0;
  for (std::size_t r = 0; r < ds.n_rows(); ++r) fp = push(fp, ds.id(r));
  return fp;
}

}  // namespace fingerprint

}  // namespace fwls

#endif  // FWLS_CORE_HPP
