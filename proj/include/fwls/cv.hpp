#ifndef FWLS_CV_HPP
#define FWLS_CV_HPP

// K-fold out-of-sample evaluation of blends: pooled OOS RMSE for a
// meta-feature subset, greedy forward meta-feature selection, and the
// baseline that feeds meta-features in as plain additive regressors.

#include <fmt/core.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fwls/core.hpp"
#include "fwls/gram.hpp"
#include "fwls/ridge.hpp"

namespace fwls::cv {

inline constexpr double kSelectionTolerance = 1e-7;
inline const std::vector<double> kLambdaGrid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};

struct FoldPlan {
  std::size_t n_rows = 0;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> assignment;  // fold of each row

  std::vector<std::size_t> fold_sizes() const {
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t f : assignment) ++sizes[f];
    return sizes;
  }
};

/// Unbiased integer in [0, bound) from a 64-bit engine.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

/// Shuffles rows with a seeded Fisher-Yates pass and deals them round-robin,
/// so fold sizes differ by at most one.
inline FoldPlan make_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || k > n)
    throw ContractViolation("make_folds: need 2 <= k <= n (k=" + std::to_string(k) +
                            ", n=" + std::to_string(n) + ")");
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_below(rng, i)]);
  FoldPlan plan{n, k, seed, std::vector<std::size_t>(n)};
  for (std::size_t pos = 0; pos < n; ++pos) plan.assignment[perm[pos]] = pos % k;
  return plan;
}

/// What each fold's fit saw; kept so the out-of-sample discipline can be
/// checked after the fact.
struct FoldRecord {
  std::size_t fold = 0;
  std::vector<std::size_t> train_folds;  // folds merged into the fit
  std::uint64_t train_rows = 0;
  std::uint64_t predicted_rows = 0;
};

struct OosPredictions {
  std::vector<double> predictions;  // one per dataset row
  std::vector<FoldRecord> folds;

  /// True iff no fold's fit included the fold it predicted and every row was
  /// predicted exactly once.
  bool leakage_free(const FoldPlan& plan) const {
    std::uint64_t predicted = 0;
    const auto sizes = plan.fold_sizes();
    for (const auto& f : folds) {
      if (std::find(f.train_folds.begin(), f.train_folds.end(), f.fold) != f.train_folds.end())
        return false;
      if (f.predicted_rows != sizes[f.fold]) return false;
      if (f.train_rows + f.predicted_rows != plan.n_rows) return false;
      predicted += f.predicted_rows;
    }
    return predicted == plan.n_rows && predictions.size() == plan.n_rows;
  }
};

inline double rmse(std::span<const double> pred, std::span<const double> y) {
  require(pred.size() == y.size() && !y.empty(), "rmse: size mismatch");
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = pred[i] - y[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(y.size()));
}

/// Per-fold sufficient statistics over all meta-features of a dataset. Any
/// feature subset can then be evaluated without touching the rows again.
class FoldStatistics {
 public:
  FoldStatistics(const StackedDataset& ds, const FoldPlan& plan) : ds_(&ds), plan_(plan) {
    if (plan.n_rows != ds.n_rows() || plan.assignment.size() != ds.n_rows())
      throw ContractViolation("cv: fold plan covers " + std::to_string(plan.n_rows) +
                              " rows but the dataset has " + std::to_string(ds.n_rows()));
    std::vector<GramAccumulator> acc(plan.k, GramAccumulator(ds.mapping()));
    for (std::size_t r = 0; r < ds.n_rows(); ++r) acc[plan.assignment[r]].add(ds.row(r));
    for (auto& a : acc) per_fold_.push_back(a.finish());
  }

  const FoldPlan& plan() const noexcept { return plan_; }
  const StackedDataset& dataset() const noexcept { return *ds_; }

  /// Out-of-sample predictions for the given meta-feature subset.
  OosPredictions predict(std::span<const std::size_t> features, double lambda) const {
    const StackedDataset& ds = *ds_;
    OosPredictions out;
    out.predictions.assign(ds.n_rows(), 0.0);
    std::vector<double> fsub(features.size());
    for (std::size_t k = 0; k < plan_.k; ++k) {
      FoldRecord rec;
      rec.fold = k;
      GramState train(ds.mapping());
      for (std::size_t other = 0; other < plan_.k; ++other) {
        if (other == k) continue;
        train = merge(train, per_fold_[other]);
        rec.train_folds.push_back(other);
      }
      rec.train_rows = train.n_rows;
      const SolvedBlend fit = solve(select_features(train, features), lambda);
      for (std::size_t r = 0; r < ds.n_rows(); ++r) {
        if (plan_.assignment[r] != k) continue;
        const auto f = ds.f(r);
        for (std::size_t s = 0; s < features.size(); ++s) fsub[s] = f[features[s]];
        out.predictions[r] = blend_predict(fit.coeffs, ds.g(r), fsub);
        ++rec.predicted_rows;
      }
      out.folds.push_back(std::move(rec));
    }
    return out;
  }

  double rmse(std::span<const std::size_t> features, double lambda) const {
    return cv::rmse(predict(features, lambda).predictions, ds_->targets());
  }

 private:
  const StackedDataset* ds_;
  FoldPlan plan_;
  std::vector<GramState> per_fold_;
};

/// Pooled RMSE over all N out-of-sample predictions.
inline double cv_rmse(const StackedDataset& ds, std::span<const std::size_t> features,
                      double lambda, const FoldPlan& plan) {
  require(!features.empty(), "cv_rmse: empty meta-feature subset");
  return FoldStatistics(ds, plan).rmse(features, lambda);
}

/// Dataset whose models are [g_1..g_L, f_j for j in features] and whose only
/// meta-feature is the constant 1: meta-features as additive regressors.
inline StackedDataset merged_inputs(const StackedDataset& ds,
                                    std::span<const std::size_t> features) {
  for (std::size_t j : features)
    require(j < ds.n_features(), "merged_inputs: feature index out of range");
  const std::size_t L = ds.n_models() + features.size();
  std::vector<double> p;
  p.reserve(ds.n_rows() * L);
  for (std::size_t r = 0; r < ds.n_rows(); ++r) {
    auto g = ds.g(r);
    p.insert(p.end(), g.begin(), g.end());
    auto f = ds.f(r);
    for (std::size_t j : features) p.push_back(f[j]);
  }
  auto names = ds.model_names();
  for (std::size_t j : features) names.push_back("f:" + ds.feature_names()[j]);
  return {std::vector<double>(ds.targets().begin(), ds.targets().end()),
          std::move(p),
          std::vector<double>(ds.n_rows(), 1.0),
          L,
          1,
          std::move(names),
          {"const"},
          ds.row_ids()};
}

/// Same CV protocol as cv_rmse, with the meta-features appended as extra
/// regressors instead of multiplying the models.
inline double merged_baseline_rmse(const StackedDataset& ds,
                                   std::span<const std::size_t> features, double lambda,
                                   const FoldPlan& plan) {
  const StackedDataset merged = merged_inputs(ds, features);
  const std::size_t only = 0;
  return cv_rmse(merged, std::span(&only, 1), lambda, plan);
}

/// Grid value with the lowest CV RMSE; ties go to the earlier value.
inline double select_lambda(const FoldStatistics& stats,
                            std::span<const std::size_t> features,
                            std::span<const double> grid) {
  require(!grid.empty(), "select_lambda: empty grid");
  double best = grid.front();
  double best_rmse = stats.rmse(features, best);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double e = stats.rmse(features, grid[k]);
    if (e < best_rmse) {
      best_rmse = e;
      best = grid[k];
    }
  }
  return best;
}

struct CvReportRow {
  std::size_t m = 0;  // cumulative set size
  std::string feature;
  double oos_rmse = 0.0;
};

struct CvReport {
  std::vector<CvReportRow> rows;
  std::vector<std::size_t> selected;  // accepted feature indices, base first
  std::vector<CvReportRow> rejected;  // m = set size the candidate was tried at
  double lambda = 0.0;
  std::uint64_t seed = 0;
  std::size_t k = 0;

  double final_rmse() const { return rows.empty() ? 0.0 : rows.back().oos_rmse; }

  void write_csv(std::ostream& out) const {
    out << "m,feature,oos_rmse\n";
    for (const auto& r : rows)
      out << fmt::format("{},{},{:.9f}\n", r.m, r.feature, r.oos_rmse);
  }

  void write_table(std::ostream& out) const {
    std::size_t width = 12;
    for (const auto& r : rows) width = std::max(width, r.feature.size());
    out << fmt::format("# {}-fold CV, seed {}, lambda {:g}\n", k, seed, lambda);
    out << fmt::format("{:>3}  {:<{}}  {:>11}\n", "m", "meta-feature", width, "OOS RMSE");
    for (const auto& r : rows)
      out << fmt::format("{:>3}  {:<{}}  {:>11.6f}\n", r.m, r.feature, width, r.oos_rmse);
  }
};

/// Tries `candidates` in order on top of `base` (the constant feature by
/// default) and keeps each one that lowers pooled OOS RMSE by more than
/// kSelectionTolerance. The result depends on candidate order.
inline CvReport forward_select(const FoldStatistics& stats,
                               std::span<const std::size_t> candidates, double lambda,
                               std::vector<std::size_t> base = {0}) {
  const StackedDataset& ds = stats.dataset();
  require(!base.empty(), "forward_select: empty base set");
  for (std::size_t c : candidates) {
    require(c < ds.n_features(), "forward_select: candidate out of range");
    require(std::find(base.begin(), base.end(), c) == base.end(),
            "forward_select: candidate " + ds.feature_names()[c] + " is in the base set");
  }
  CvReport report;
  report.lambda = lambda;
  report.seed = stats.plan().seed;
  report.k = stats.plan().k;
  report.selected = base;
  double current = stats.rmse(report.selected, lambda);
  std::string base_name = ds.feature_names()[base[0]];
  for (std::size_t b = 1; b < base.size(); ++b) base_name += "+" + ds.feature_names()[base[b]];
  report.rows.push_back({base.size(), base_name, current});
  for (std::size_t c : candidates) {
    auto trial = report.selected;
    trial.push_back(c);
    const double e = stats.rmse(trial, lambda);
    if (e < current - kSelectionTolerance) {
      report.selected = std::move(trial);
      current = e;
      report.rows.push_back({report.selected.size(), ds.feature_names()[c], e});
    } else {
      report.rejected.push_back({trial.size(), ds.feature_names()[c], e});
    }
  }
  return report;
}

/// Cumulative OOS RMSE of a fixed feature order, without the acceptance
/// rule: row m is the first m features.
inline CvReport cumulative_report(const FoldStatistics& stats,
                                  std::span<const std::size_t> features, double lambda) {
  const StackedDataset& ds = stats.dataset();
  require(!features.empty(), "cumulative_report: empty feature list");
  CvReport report;
  report.lambda = lambda;
  report.seed = stats.plan().seed;
  report.k = stats.plan().k;
  for (std::size_t m = 1; m <= features.size(); ++m) {
    require(features[m - 1] < ds.n_features(), "cumulative_report: feature out of range");
    report.selected.push_back(features[m - 1]);
    report.rows.push_back({m, ds.feature_names()[features[m - 1]],
                           stats.rmse(report.selected, lambda)});
  }
  return report;
}

inline CvReport forward_select(const StackedDataset& ds,
                               std::span<const std::size_t> candidates, double lambda,
                               const FoldPlan& plan) {
  return forward_select(FoldStatistics(ds, plan), candidates, lambda);
}

}  // namespace fwls::cv

#endif  // FWLS_CV_HPP
